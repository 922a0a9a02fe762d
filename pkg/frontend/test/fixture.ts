/** On-disk crop fixture shared by the extractor tests. */

import { mkdtemp, writeFile } from 'fs/promises'
import { tmpdir } from 'os'
import * as path from 'path'
import { PNG } from 'pngjs'

function seededPng(size: number, seed: number): Buffer {
  const png = new PNG({ width: size, height: size })
  let state = seed >>> 0
  const next = () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0
    return state
  }
  for (let i = 0; i < size * size; i++) {
    png.data[i * 4] = next() & 0xff
    png.data[i * 4 + 1] = next() & 0xff
    png.data[i * 4 + 2] = next() & 0xff
    png.data[i * 4 + 3] = 255
  }
  return PNG.sync.write(png)
}

export interface Fixture {
  dir: string
  pairsPath: string
  pairCount: number
}

export async function makeFixture(pairCount = 6, size = 32): Promise<Fixture> {
  const dir = await mkdtemp(path.join(tmpdir(), 'crops-'))
  const pairs = []
  for (let i = 0; i < pairCount; i++) {
    const defect = `img${i}_scuff_0_defect.png`
    const fg = `img${i}_scuff_0_fg.png`
    const bg = i % 2 === 0 ? `img${i}_scuff_0_bg.png` : null
    await writeFile(path.join(dir, defect), seededPng(size, 100 + i))
    await writeFile(path.join(dir, fg), seededPng(size, 200 + i))
    if (bg) {
      await writeFile(path.join(dir, bg), seededPng(size, 300 + i))
    }
    pairs.push({
      sample_id: `img${i}_scuff_0`,
      image_id: `img${i}`,
      anomaly_class: 'scuff',
      object_type: 'plate',
      index: 0,
      box_height: size,
      box_width: size,
      seed_used: i,
      defect_png: defect,
      fg_png: fg,
      bg_png: bg,
      flags: [],
    })
  }
  const index = {
    dataset_name: 'fixture',
    target_size: size,
    seed: 42,
    pairs,
    skips: [],
  }
  const pairsPath = path.join(dir, 'pairs.json')
  await writeFile(pairsPath, JSON.stringify(index, null, 2))
  return { dir, pairsPath, pairCount }
}
