/**
 * Batch extraction: crops listed in a pairs index, one embedding row per
 * crop, written as an FGAP matrix with a metadata sidecar. Row order is
 * the pairs-index order regardless of batch size. Nothing is written
 * until every crop has been embedded, so a decode failure leaves no
 * partial file behind.
 */

import { loadModel, resolveBackbone } from './backbones'
import { BackboneMeta, FeatureMatrix, writeFgap } from './fgap'
import { CROP_KIND_TO_META_KIND, CropKind, loadPairsIndex, selectCrops, uniqueOrEmpty } from './pairs'
import { decodePng } from './png'

export interface ExtractorConfig {
  backboneName: string
  pretrainTag: string
  inputDir: string
  pairsPath: string
  outputPath: string
  batchSize: number
  kind: CropKind
}

export interface ExtractResult {
  n: number
  p: number
  outputPath: string
  backboneName: string
  layerTag: string
}

export async function extract(config: ExtractorConfig): Promise<ExtractResult> {
  if (config.batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${config.batchSize}`)
  }
  const spec = resolveBackbone(config.backboneName)
  const index = await loadPairsIndex(config.pairsPath)
  const crops = selectCrops(index, config.inputDir, config.kind)
  if (crops.length === 0) {
    throw new Error(`no crops of kind ${config.kind} listed in ${config.pairsPath}`)
  }

  const model = await loadModel(spec, config.pretrainTag)
  try {
    const rows: Float32Array[] = []
    let dim = -1
    for (let start = 0; start < crops.length; start += config.batchSize) {
      const slice = crops.slice(start, start + config.batchSize)
      const images = []
      for (const crop of slice) {
        images.push(await decodePng(crop.file))
      }
      const embedded = await model.embed(images)
      for (const row of embedded) {
        if (dim === -1) {
          dim = row.length
        } else if (row.length !== dim) {
          throw new Error(
            `dimension inconsistency across batches: got ${row.length}, expected ${dim}`,
          )
        }
        rows.push(row)
      }
    }

    const values = new Float32Array(rows.length * dim)
    rows.forEach((row, i) => values.set(row, i * dim))
    const meta: BackboneMeta = {
      backbone_name: spec.name,
      pretrain_dataset: config.pretrainTag,
      dataset: index.dataset_name,
      object_type: uniqueOrEmpty(crops.map((c) => c.objectType)),
      anomaly_class: uniqueOrEmpty(crops.map((c) => c.anomalyClass)),
      kind: CROP_KIND_TO_META_KIND[config.kind],
      layer_tag: spec.layerTag,
    }
    const matrix: FeatureMatrix = {
      n: rows.length,
      p: dim,
      values,
      sampleIds: crops.map((c) => c.sampleId),
      meta,
    }
    await writeFgap(matrix, config.outputPath)
    return {
      n: matrix.n,
      p: matrix.p,
      outputPath: config.outputPath,
      backboneName: spec.name,
      layerTag: spec.layerTag,
    }
  } finally {
    model.dispose()
  }
}
