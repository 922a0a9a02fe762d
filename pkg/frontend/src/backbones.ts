/**
 * Backbone registry and embedding models.
 *
 * Two source kinds exist: remote tfjs graph models (pretrained weights
 * fetched from a model hub at run time) and built-in seeded random
 * projection convnets that run fully offline. The built-ins exist so the
 * extraction pipeline and its determinism guarantees can be exercised
 * without any download; they are labeled with pretraining tag "none" and
 * make no pretraining claim. Every model ends in a global average pool,
 * so one crop maps to one fixed-length float32 row.
 */

import * as tf from '@tensorflow/tfjs'
import { DecodedImage } from './png'

export interface BuiltinSource {
  kind: 'builtin'
  seed: number
  widths: number[]
}

export interface RemoteSource {
  kind: 'graph-url'
  urls: Record<string, string> // pretraining tag -> model url
}

export interface BackboneSpec {
  name: string
  category: string
  pretrainTags: string[]
  layerTag: string
  source: BuiltinSource | RemoteSource
}

const HUB = 'https://www.kaggle.com/models'

export const REGISTRY: BackboneSpec[] = [
  {
    name: 'conv-rand-s',
    category: 'Traditional CNNs',
    pretrainTags: ['none'],
    layerTag: 'gap-stage3',
    source: { kind: 'builtin', seed: 1001, widths: [16, 32, 64] },
  },
  {
    name: 'conv-rand-m',
    category: 'Traditional CNNs',
    pretrainTags: ['none'],
    layerTag: 'gap-stage4',
    source: { kind: 'builtin', seed: 2002, widths: [24, 48, 96, 192] },
  },
  {
    name: 'mobilenet-v2',
    category: 'Traditional CNNs',
    pretrainTags: ['in1k'],
    layerTag: 'gap-final',
    source: {
      kind: 'graph-url',
      urls: { in1k: `${HUB}/google/mobilenet-v2/TfJs/100-224-feature-vector/3` },
    },
  },
  {
    name: 'mobilenet-v3-small',
    category: 'Traditional CNNs',
    pretrainTags: ['in1k'],
    layerTag: 'gap-final',
    source: {
      kind: 'graph-url',
      urls: { in1k: `${HUB}/google/mobilenet-v3/TfJs/small-100-224-feature-vector/1` },
    },
  },
]

export function listBackbones(category?: string): Map<string, BackboneSpec[]> {
  const grouped = new Map<string, BackboneSpec[]>()
  for (const spec of REGISTRY) {
    if (category && spec.category !== category) continue
    const bucket = grouped.get(spec.category) ?? []
    bucket.push(spec)
    grouped.set(spec.category, bucket)
  }
  return grouped
}

export function resolveBackbone(name: string): BackboneSpec {
  const spec = REGISTRY.find((s) => s.name === name)
  if (!spec) {
    const known = REGISTRY.map((s) => s.name).join(', ')
    throw new Error(`unknown backbone ${name}; known: ${known}`)
  }
  return spec
}

export interface EmbeddingModel {
  /** Embeds a batch of same-size RGB crops into [batch, dim] float32. */
  embed(batch: DecodedImage[]): Promise<Float32Array[]>
  dispose(): void
}

/** mulberry32: tiny deterministic PRNG for the seeded weight tensors. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seededKernel(rand: () => number, shape: [number, number, number, number]): tf.Tensor4D {
  const fanIn = shape[0] * shape[1] * shape[2]
  const limit = Math.sqrt(6 / fanIn)
  const size = shape[0] * shape[1] * shape[2] * shape[3]
  const values = new Float32Array(size)
  for (let i = 0; i < size; i++) {
    values[i] = Math.fround((rand() * 2 - 1) * limit)
  }
  return tf.tensor4d(values, shape)
}

class BuiltinModel implements EmbeddingModel {
  private kernels: tf.Tensor4D[]
  readonly dim: number

  constructor(source: BuiltinSource) {
    const rand = mulberry32(source.seed)
    this.kernels = []
    let channels = 3
    for (const width of source.widths) {
      this.kernels.push(seededKernel(rand, [3, 3, channels, width]))
      channels = width
    }
    this.dim = channels
  }

  private batchToTensor(batch: DecodedImage[]): tf.Tensor4D {
    const { width, height } = batch[0]
    const flat = new Float32Array(batch.length * height * width * 3)
    for (let b = 0; b < batch.length; b++) {
      const img = batch[b]
      if (img.width !== width || img.height !== height) {
        throw new Error(
          `crop size ${img.height}x${img.width} differs from batch size ${height}x${width}`,
        )
      }
      const base = b * height * width * 3
      for (let i = 0; i < img.pixels.length; i++) {
        flat[base + i] = Math.fround(img.pixels[i] / 127.5 - 1)
      }
    }
    return tf.tensor4d(flat, [batch.length, height, width, 3])
  }

  async embed(batch: DecodedImage[]): Promise<Float32Array[]> {
    const pooled = tf.tidy(() => {
      let x: tf.Tensor4D = this.batchToTensor(batch)
      for (const kernel of this.kernels) {
        x = tf.relu(tf.conv2d(x, kernel, 2, 'same'))
      }
      return tf.mean(x, [1, 2]) as tf.Tensor2D
    })
    const data = (await pooled.data()) as Float32Array
    pooled.dispose()
    const rows: Float32Array[] = []
    for (let b = 0; b < batch.length; b++) {
      rows.push(data.slice(b * this.dim, (b + 1) * this.dim))
    }
    return rows
  }

  dispose(): void {
    this.kernels.forEach((k) => k.dispose())
  }
}

class RemoteGraphModel implements EmbeddingModel {
  constructor(private model: tf.GraphModel, private inputSize: number) {}

  async embed(batch: DecodedImage[]): Promise<Float32Array[]> {
    const output = tf.tidy(() => {
      const tensors = batch.map((img) => {
        const raw = tf.tensor3d(img.pixels, [img.height, img.width, 3]).div(255)
        return tf.image.resizeBilinear(raw as tf.Tensor3D, [this.inputSize, this.inputSize])
      })
      const stacked = tf.stack(tensors) as tf.Tensor4D
      let out = this.model.predict(stacked) as tf.Tensor
      while (out.rank > 2) {
        out = tf.mean(out, 1)
      }
      return out as tf.Tensor2D
    })
    const [n, dim] = output.shape
    const data = (await output.data()) as Float32Array
    output.dispose()
    const rows: Float32Array[] = []
    for (let b = 0; b < n; b++) {
      rows.push(data.slice(b * dim, (b + 1) * dim))
    }
    return rows
  }

  dispose(): void {
    this.model.dispose()
  }
}

export async function loadModel(spec: BackboneSpec, pretrain: string): Promise<EmbeddingModel> {
  await tf.setBackend('cpu')
  if (!spec.pretrainTags.includes(pretrain)) {
    throw new Error(
      `backbone ${spec.name} has no ${pretrain} checkpoint (available: ${spec.pretrainTags.join(', ')})`,
    )
  }
  if (spec.source.kind === 'builtin') {
    return new BuiltinModel(spec.source)
  }
  const url = spec.source.urls[pretrain]
  try {
    const model = await tf.loadGraphModel(url, { fromTFHub: true })
    return new RemoteGraphModel(model, 224)
  } catch (err) {
    throw new Error(
      `could not load ${spec.name} (${pretrain}) from the model hub: ${(err as Error).message}`,
    )
  }
}
