#!/usr/bin/env node
/** Command line front end: `extract` and `list-backbones`. */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { listBackbones } from './backbones'
import { extract } from './extract'
import { CropKind } from './pairs'

export async function main(argv: string[]): Promise<number> {
  let failed = false
  const parser = yargs(argv)
    .scriptName('repgap-extract')
    .command(
      'extract',
      'embed crops through a backbone and write an FGAP matrix',
      (y) =>
        y
          .option('backbone', { type: 'string', demandOption: true, describe: 'backbone name' })
          .option('pretrain', { type: 'string', default: 'none', describe: 'pretraining tag' })
          .option('in', { type: 'string', demandOption: true, describe: 'crop directory' })
          .option('pairs', { type: 'string', demandOption: true, describe: 'pairs.json path' })
          .option('out', { type: 'string', demandOption: true, describe: 'FGAP output path' })
          .option('batch', { type: 'number', default: 32, describe: 'batch size' })
          .option('kind', {
            type: 'string',
            default: 'defect',
            choices: ['defect', 'fg', 'bg'],
            describe: 'which crop of each pair to embed',
          }),
      async (args) => {
        try {
          const result = await extract({
            backboneName: args.backbone,
            pretrainTag: args.pretrain,
            inputDir: args.in,
            pairsPath: args.pairs,
            outputPath: args.out,
            batchSize: args.batch,
            kind: args.kind as CropKind,
          })
          console.log(
            `${result.n}x${result.p} (${result.backboneName}, ${result.layerTag}) -> ${result.outputPath}`,
          )
        } catch (err) {
          console.error(`error: ${(err as Error).message}`)
          failed = true
        }
      },
    )
    .command(
      'list-backbones',
      'print resolvable backbones grouped by architecture category',
      (y) => y.option('category', { type: 'string', describe: 'filter by category' }),
      (args) => {
        const grouped = listBackbones(args.category)
        if (grouped.size === 0) {
          console.error(`error: no backbones in category ${args.category}`)
          failed = true
          return
        }
        for (const [category, specs] of grouped) {
          console.log(`${category}:`)
          for (const spec of specs) {
            const offline = spec.source.kind === 'builtin' ? ' [offline]' : ''
            console.log(`  ${spec.name} (${spec.pretrainTags.join(', ')})${offline}`)
          }
        }
      },
    )
    .demandCommand(1)
    .strict()
    .help()

  await parser.parseAsync()
  return failed ? 1 : 0
}

if (require.main === module) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code
  })
}
