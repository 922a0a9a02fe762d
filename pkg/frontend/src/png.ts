/** PNG crop decoding into flat RGB arrays. */

import { promises as fs } from 'fs'
import { PNG } from 'pngjs'

export interface DecodedImage {
  width: number
  height: number
  /** RGB, row-major, length width*height*3 */
  pixels: Uint8Array
}

export async function decodePng(file: string): Promise<DecodedImage> {
  let buf: Buffer
  try {
    buf = await fs.readFile(file)
  } catch {
    throw new Error(`crop not found: ${file}`)
  }
  let png: PNG
  try {
    png = PNG.sync.read(buf)
  } catch (err) {
    throw new Error(`cannot decode ${file}: ${(err as Error).message}`)
  }
  const { width, height, data } = png
  const pixels = new Uint8Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    pixels[i * 3] = data[i * 4]
    pixels[i * 3 + 1] = data[i * 4 + 1]
    pixels[i * 3 + 2] = data[i * 4 + 2]
  }
  return { width, height, pixels }
}
