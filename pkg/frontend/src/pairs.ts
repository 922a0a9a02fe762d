/** Loading and validation of the `pairs.json` crop index. */

import { promises as fs } from 'fs'
import * as path from 'path'
import { z } from 'zod'

const pairEntrySchema = z
  .object({
    sample_id: z.string().min(1),
    image_id: z.string(),
    anomaly_class: z.string(),
    object_type: z.string(),
    index: z.number().int(),
    defect_png: z.string(),
    fg_png: z.string(),
    bg_png: z.string().nullable(),
    flags: z.array(z.string()),
  })
  .passthrough()

const pairsIndexSchema = z
  .object({
    dataset_name: z.string(),
    target_size: z.number().int(),
    seed: z.number().int(),
    pairs: z.array(pairEntrySchema),
  })
  .passthrough()

export type PairEntry = z.infer<typeof pairEntrySchema>
export type PairsIndex = z.infer<typeof pairsIndexSchema>

export type CropKind = 'defect' | 'fg' | 'bg'

export const CROP_KIND_TO_META_KIND = {
  defect: 'defect',
  fg: 'normal_fg',
  bg: 'background',
} as const

export async function loadPairsIndex(file: string): Promise<PairsIndex> {
  let text: string
  try {
    text = await fs.readFile(file, 'utf-8')
  } catch {
    throw new Error(`pairs index not found: ${file}`)
  }
  const parsed = pairsIndexSchema.safeParse(JSON.parse(text))
  if (!parsed.success) {
    throw new Error(`${file}: not a valid pairs index (${parsed.error.issues[0]?.message})`)
  }
  return parsed.data
}

export interface SelectedCrop {
  sampleId: string
  file: string
  objectType: string
  anomalyClass: string
}

/**
 * Crops of one kind in pairs-index order. Entries without a background
 * crop are skipped when the background kind is requested.
 */
export function selectCrops(index: PairsIndex, cropDir: string, kind: CropKind): SelectedCrop[] {
  const out: SelectedCrop[] = []
  for (const entry of index.pairs) {
    const name = kind === 'defect' ? entry.defect_png : kind === 'fg' ? entry.fg_png : entry.bg_png
    if (name == null) continue
    out.push({
      sampleId: entry.sample_id,
      file: path.join(cropDir, name),
      objectType: entry.object_type,
      anomalyClass: entry.anomaly_class,
    })
  }
  return out
}

/** The single shared value of a field, or "" when entries disagree. */
export function uniqueOrEmpty(values: string[]): string {
  const set = new Set(values)
  return set.size === 1 ? values[0] : ''
}
