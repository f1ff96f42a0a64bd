import { z } from "zod";

/** Model spec JSON as produced/consumed by the dlfault CLI (`localize
 * --emit-spec`, `seed --spec`). */
export const LayerSpecSchema = z.object({
  kind: z.string(),
  units: z.number().int().positive().nullish(),
  activation: z.string().nullish(),
  source_line: z.number().int().nullish(),
});

export const ModelSpecSchema = z.object({
  layers: z.array(LayerSpecSchema),
  loss: z.object({
    name: z.string(),
    source_line: z.number().int().nullish(),
  }),
  optimizer: z.object({
    name: z.string(),
    learning_rate: z.number().positive().nullish(),
    source_line: z.number().int().nullish(),
  }),
  epochs: z.object({
    value: z.number().int().min(1),
    source_line: z.number().int().nullish(),
  }),
  batch_size: z.number().int().positive().nullish(),
});

export type LayerSpec = z.infer<typeof LayerSpecSchema>;
export type ModelSpec = z.infer<typeof ModelSpecSchema>;

export class BuildFailure extends Error {}

export function parseModelSpec(text: string): ModelSpec {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new BuildFailure(`model spec is not valid JSON: ${String(err)}`);
  }
  const result = ModelSpecSchema.safeParse(doc);
  if (!result.success) {
    throw new BuildFailure(`model spec schema error: ${result.error.message}`);
  }
  return result.data;
}
