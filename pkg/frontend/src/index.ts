export { listBackbones, resolveBackbone, REGISTRY } from './backbones'
export { extract } from './extract'
export type { ExtractorConfig, ExtractResult } from './extract'
export { decodeFgap, encodeFgap, readFgap, writeFgap, FGAP_MAGIC } from './fgap'
export type { BackboneMeta, FeatureMatrix } from './fgap'
export { loadPairsIndex, selectCrops } from './pairs'
export type { CropKind, PairsIndex } from './pairs'
