/**
 * FGAP binary feature-matrix format.
 *
 * Bytes 0-7: ASCII magic "FGAPv001". Bytes 8-11: u32le sample count n.
 * Bytes 12-15: u32le feature length p. Then n*p float32le values,
 * row-major. Metadata and per-row sample ids live in a JSON sidecar
 * named `<file>.meta.json`.
 */

import { promises as fs } from 'fs'

export const FGAP_MAGIC = 'FGAPv001'

export interface BackboneMeta {
  backbone_name: string
  pretrain_dataset: string
  dataset: string
  object_type: string
  anomaly_class: string
  kind: 'defect' | 'normal_fg' | 'background'
  layer_tag: string
}

export interface FeatureMatrix {
  n: number
  p: number
  values: Float32Array // length n*p, row-major
  sampleIds: string[]
  meta: BackboneMeta
}

export function validateMatrix(matrix: FeatureMatrix): void {
  const { n, p, values, sampleIds } = matrix
  if (n < 1 || p < 1) {
    throw new Error(`feature matrix must be at least 1x1, got ${n}x${p}`)
  }
  if (values.length !== n * p) {
    throw new Error(`values length ${values.length} does not match ${n}x${p}`)
  }
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite value at flat index ${i}`)
    }
  }
  if (sampleIds.length !== n) {
    throw new Error(`sample ids length ${sampleIds.length} does not match n=${n}`)
  }
  if (new Set(sampleIds).size !== n) {
    throw new Error('duplicate sample ids')
  }
}

export function encodeFgap(matrix: FeatureMatrix): Buffer {
  validateMatrix(matrix)
  const buf = Buffer.alloc(16 + matrix.n * matrix.p * 4)
  buf.write(FGAP_MAGIC, 0, 'ascii')
  buf.writeUInt32LE(matrix.n, 8)
  buf.writeUInt32LE(matrix.p, 12)
  for (let i = 0; i < matrix.values.length; i++) {
    buf.writeFloatLE(matrix.values[i], 16 + i * 4)
  }
  return buf
}

export function decodeFgap(buf: Buffer): { n: number; p: number; values: Float32Array } {
  if (buf.length < 16) {
    throw new Error(`truncated header, ${buf.length} bytes`)
  }
  if (buf.toString('ascii', 0, 8) !== FGAP_MAGIC) {
    throw new Error('not an FGAP file')
  }
  const n = buf.readUInt32LE(8)
  const p = buf.readUInt32LE(12)
  const expected = 16 + n * p * 4
  if (buf.length !== expected) {
    throw new Error(`expected ${expected} bytes, found ${buf.length}`)
  }
  const values = new Float32Array(n * p)
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(16 + i * 4)
  }
  return { n, p, values }
}

function sidecarPath(path: string): string {
  return `${path}.meta.json`
}

/** Writes the binary plus sidecar atomically via temp-file renames. */
export async function writeFgap(matrix: FeatureMatrix, path: string): Promise<void> {
  const payload = encodeFgap(matrix)
  const tmp = `${path}.tmp`
  await fs.writeFile(tmp, payload)
  await fs.rename(tmp, path)
  const sidecar = {
    ...matrix.meta,
    sample_ids: matrix.sampleIds,
  }
  const scTmp = `${sidecarPath(path)}.tmp`
  await fs.writeFile(scTmp, JSON.stringify(sidecar, Object.keys(sidecar).sort(), 2) + '\n')
  await fs.rename(scTmp, sidecarPath(path))
}

export async function readFgap(path: string): Promise<FeatureMatrix> {
  const { n, p, values } = decodeFgap(await fs.readFile(path))
  const raw = JSON.parse(await fs.readFile(sidecarPath(path), 'utf-8'))
  const sampleIds: string[] = raw.sample_ids ?? []
  const meta: BackboneMeta = {
    backbone_name: raw.backbone_name ?? '',
    pretrain_dataset: raw.pretrain_dataset ?? '',
    dataset: raw.dataset ?? '',
    object_type: raw.object_type ?? '',
    anomaly_class: raw.anomaly_class ?? '',
    kind: raw.kind ?? 'defect',
    layer_tag: raw.layer_tag ?? '',
  }
  const matrix = { n, p, values, sampleIds, meta }
  validateMatrix(matrix)
  return matrix
}
