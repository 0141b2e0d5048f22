/**
 * Dataloader bindings for the cutmix-lp augmentation pipeline.
 *
 * The bindings operate on contiguous row-major tensor buffers, stage
 * them as RTEN files plus a manifest, drive the CLI, and read the
 * augmented tensors back. Staged payloads are views over the caller's
 * buffers (never cloned in process); returned tensors are backed by
 * freshly read bytes, so mutating inputs after a call can not alter
 * already-returned outputs.
 *
 * Batch calls with distinct seeds are independent; use the async
 * variant to run several concurrently.
 */

import { execFile, execFileSync } from "node:child_process";
import {
  closeSync,
  mkdirSync,
  mkdtempSync,
  openSync,
  readFileSync,
  rmSync,
  writeFileSync,
  writeSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { CliError, ShapeError } from "./errors.js";
import { Tensor, decodeRten, elementCount, encodeHeader, payloadView } from "./rten.js";

export { CliError, ShapeError } from "./errors.js";
export {
  RtenBadMagicError,
  RtenDimOverflowError,
  RtenError,
  RtenTruncatedError,
} from "./errors.js";
export { decodeRten, encodeRten } from "./rten.js";
export type { Tensor, TensorData } from "./rten.js";

const execFileAsync = promisify(execFile);

export interface AugmentConfig {
  policy: "naive" | "lp_map" | "lp_xai";
  boxRange: [number, number];
  p: number;
  tCam?: number;
  tMap?: number;
  batchSize?: number;
  partnerMode?: "batch" | "dataset";
}

export interface AugmentBatchInput {
  /** [n, c, h, w], uint8 or float32. */
  images: Tensor;
  /** Per-sample 1-based class ids. */
  labels: number[][];
  numClasses: number;
  /** [n, h, w] uint8 reference maps (lp_map). */
  maps?: Tensor;
  /** [n, L, h, w] uint8 activation masks (lp_xai). */
  masks?: Tensor;
  /** [n, L, h, w] float32 heatmaps, thresholded at tCam (lp_xai). */
  heatmaps?: Tensor;
  config: AugmentConfig;
  seed: number;
  epoch?: number;
}

export interface ProvenanceEntry {
  id: string;
  augmented: boolean;
  sources?: [string, string];
  box1?: [number, number, number, number];
  box2?: [number, number, number, number];
  flags?: string[];
}

export interface AugmentBatchResult {
  images: Tensor;
  labels: number[][];
  /** Present for the naive policy: per-sample soft class weights. */
  softLabels?: number[][];
  maps?: Tensor;
  masks?: Tensor;
  provenance: ProvenanceEntry[];
}

/** Command used to reach the CLI; override with CUTMIX_LP_CLI. */
export function cliCommand(): string[] {
  const env = process.env.CUTMIX_LP_CLI;
  if (env && env.trim().length > 0) {
    return env.trim().split(/\s+/);
  }
  return ["python3", "-m", "cutmix_lp"];
}

function sampleId(index: number): string {
  return `s${index.toString().padStart(4, "0")}`;
}

function writeRtenFile(path: string, dtype: number, shape: number[], payload: Buffer): void {
  const fd = openSync(path, "w");
  try {
    writeSync(fd, encodeHeader(dtype, shape));
    writeSync(fd, payload);
  } finally {
    closeSync(fd);
  }
}

function checkTensor(name: string, tensor: Tensor, rank: number): void {
  if (tensor.shape.length !== rank) {
    throw new ShapeError(
      `${name} must have rank ${rank}, got shape [${tensor.shape}]`,
    );
  }
  if (tensor.shape.some((d) => !Number.isInteger(d) || d < 1)) {
    throw new ShapeError(`${name} dimensions must be positive, got [${tensor.shape}]`);
  }
  if (elementCount(tensor.shape) !== tensor.data.length) {
    throw new ShapeError(
      `${name} shape [${tensor.shape}] implies ${elementCount(tensor.shape)} ` +
        `elements, buffer has ${tensor.data.length}`,
    );
  }
}

function validate(input: AugmentBatchInput): { n: number; c: number; h: number; w: number } {
  checkTensor("images", input.images, 4);
  const [n, c, h, w] = input.images.shape;
  if (!Number.isInteger(input.numClasses) || input.numClasses < 1) {
    throw new ShapeError(`numClasses must be a positive integer, got ${input.numClasses}`);
  }
  if (input.labels.length !== n) {
    throw new ShapeError(
      `labels length ${input.labels.length} does not match batch size ${n}`,
    );
  }
  for (const [i, classes] of input.labels.entries()) {
    for (const cls of classes) {
      if (!Number.isInteger(cls) || cls < 1 || cls > input.numClasses) {
        throw new ShapeError(
          `labels[${i}] contains class ${cls}, expected 1..${input.numClasses}`,
        );
      }
    }
  }
  if (input.maps) {
    checkTensor("maps", input.maps, 3);
    if (!(input.maps.data instanceof Uint8Array)) {
      throw new ShapeError("maps must be uint8");
    }
    const [mn, mh, mw] = input.maps.shape;
    if (mn !== n || mh !== h || mw !== w) {
      throw new ShapeError(
        `maps shape [${input.maps.shape}] does not match images [${n},${h},${w}]`,
      );
    }
  }
  for (const key of ["masks", "heatmaps"] as const) {
    const stack = input[key];
    if (!stack) continue;
    checkTensor(key, stack, 4);
    const [sn, sl, sh, sw] = stack.shape;
    if (sn !== n || sh !== h || sw !== w) {
      throw new ShapeError(
        `${key} shape [${stack.shape}] does not match images [${n},*,${h},${w}]`,
      );
    }
    if (sl !== input.numClasses) {
      throw new ShapeError(
        `${key} has ${sl} class planes, expected ${input.numClasses}`,
      );
    }
  }
  if (input.masks && input.heatmaps) {
    throw new ShapeError("give either masks or heatmaps, not both");
  }
  if (input.heatmaps && !(input.heatmaps.data instanceof Float32Array)) {
    throw new ShapeError("heatmaps must be float32");
  }
  if (input.masks && !(input.masks.data instanceof Uint8Array)) {
    throw new ShapeError("masks must be uint8");
  }
  return { n, c, h, w };
}

/** Write the batch as a dataset directory; returns the manifest path. */
export function stageBatch(dir: string, input: AugmentBatchInput): string {
  const { n, c, h, w } = validate(input);
  const dtype = input.images.data instanceof Uint8Array ? "u8" : "f32";
  const dtypeCode = dtype === "u8" ? 0 : 1;
  mkdirSync(join(dir, "images"), { recursive: true });
  if (input.maps) mkdirSync(join(dir, "maps"), { recursive: true });
  if (input.masks) mkdirSync(join(dir, "masks"), { recursive: true });
  if (input.heatmaps) mkdirSync(join(dir, "heat"), { recursive: true });

  const samples: Record<string, unknown>[] = [];
  const imageStride = c * h * w;
  const mapStride = h * w;
  const stackStride = input.numClasses * h * w;
  for (let i = 0; i < n; i += 1) {
    const id = sampleId(i);
    const image = input.images.data.subarray(i * imageStride, (i + 1) * imageStride);
    writeRtenFile(join(dir, "images", `${id}.rten`), dtypeCode, [c, h, w], payloadView(image));
    const entry: Record<string, unknown> = {
      id,
      image: `images/${id}.rten`,
      labels: [...input.labels[i]].sort((a, b) => a - b),
    };
    if (input.maps) {
      const map = input.maps.data.subarray(i * mapStride, (i + 1) * mapStride);
      writeRtenFile(join(dir, "maps", `${id}.rten`), 0, [h, w], payloadView(map));
      entry.map = `maps/${id}.rten`;
    }
    if (input.masks) {
      const stack = input.masks.data.subarray(i * stackStride, (i + 1) * stackStride);
      writeRtenFile(
        join(dir, "masks", `${id}.rten`), 0, [input.numClasses, h, w], payloadView(stack),
      );
      entry.masks = `masks/${id}.rten`;
    }
    if (input.heatmaps) {
      const stack = input.heatmaps.data.subarray(i * stackStride, (i + 1) * stackStride);
      writeRtenFile(
        join(dir, "heat", `${id}.rten`), 1, [input.numClasses, h, w], payloadView(stack),
      );
      entry.heatmaps = `heat/${id}.rten`;
    }
    samples.push(entry);
  }
  const manifest = {
    classes: Array.from({ length: input.numClasses }, (_, i) => `class_${i + 1}`),
    geometry: { channels: c, height: h, width: w, dtype },
    samples,
  };
  const manifestPath = join(dir, "manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2));
  return manifestPath;
}

/** CLI arguments for one augment invocation. */
export function augmentArgs(
  manifestPath: string,
  outDir: string,
  config: AugmentConfig,
  seed: number,
  epoch: number,
  batchSize: number,
): string[] {
  const args = [
    "augment", manifestPath,
    "--out", outDir,
    "--policy", config.policy,
    "--range", `${config.boxRange[0]}:${config.boxRange[1]}`,
    "--p", String(config.p),
    "--seed", String(seed),
    "--epoch", String(epoch),
    "--batch-size", String(batchSize),
  ];
  if (config.tCam !== undefined) args.push("--t-cam", String(config.tCam));
  if (config.tMap !== undefined) args.push("--t-map", String(config.tMap));
  if (config.partnerMode) args.push("--partner-mode", config.partnerMode);
  return args;
}

function runCliSync(args: string[]): void {
  const [command, ...prefix] = cliCommand();
  try {
    execFileSync(command, [...prefix, ...args], { stdio: ["ignore", "pipe", "pipe"] });
  } catch (error) {
    throw toCliError(error);
  }
}

async function runCliAsync(args: string[]): Promise<void> {
  const [command, ...prefix] = cliCommand();
  try {
    await execFileAsync(command, [...prefix, ...args]);
  } catch (error) {
    throw toCliError(error);
  }
}

function toCliError(error: unknown): CliError {
  const err = error as { status?: number | null; stderr?: Buffer | string; message?: string };
  const stderr = err.stderr ? err.stderr.toString() : "";
  const detail = stderr.trim().length > 0 ? stderr.trim() : err.message ?? String(error);
  return new CliError(`augmentation CLI failed: ${detail}`, err.status ?? null, stderr);
}

function packOutputs(
  outDir: string,
  n: number,
  input: AugmentBatchInput,
): AugmentBatchResult {
  const [, c, h, w] = input.images.shape;
  const f32 = input.images.data instanceof Float32Array;
  const imageStride = c * h * w;
  const images = f32 ? new Float32Array(n * imageStride) : new Uint8Array(n * imageStride);
  const wantMaps = input.config.policy === "lp_map";
  const wantMasks = input.config.policy === "lp_xai";
  const maps = wantMaps ? new Uint8Array(n * h * w) : undefined;
  const masks = wantMasks ? new Uint8Array(n * input.numClasses * h * w) : undefined;

  for (let i = 0; i < n; i += 1) {
    const id = sampleId(i);
    const image = decodeRten(readFileSync(join(outDir, "images", `${id}.rten`)));
    if (f32) {
      (images as Float32Array).set(image.data as Float32Array, i * imageStride);
    } else {
      (images as Uint8Array).set(image.data as Uint8Array, i * imageStride);
    }
    if (maps) {
      const map = decodeRten(readFileSync(join(outDir, "maps", `${id}.rten`)));
      maps.set(map.data as Uint8Array, i * h * w);
    }
    if (masks) {
      const stack = decodeRten(readFileSync(join(outDir, "masks", `${id}.rten`)));
      masks.set(stack.data as Uint8Array, i * input.numClasses * h * w);
    }
  }

  const labelLines = readFileSync(join(outDir, "labels.txt"), "utf8")
    .split("\n")
    .filter((line) => line.length > 0);
  const labelById = new Map<string, number[]>();
  for (const line of labelLines) {
    const [id, rest] = line.split("\t");
    labelById.set(
      id,
      rest ? rest.split(",").filter((t) => t.length > 0).map(Number) : [],
    );
  }
  const labels = Array.from({ length: n }, (_, i) => labelById.get(sampleId(i)) ?? []);

  let softLabels: number[][] | undefined;
  if (input.config.policy === "naive") {
    softLabels = Array.from({ length: n }, () => []);
    try {
      const softLines = readFileSync(join(outDir, "soft_labels.txt"), "utf8")
        .split("\n")
        .filter((line) => line.length > 0);
      for (const line of softLines) {
        const [id, rest] = line.split("\t");
        const index = Number(id.slice(1));
        softLabels[index] = rest.split(",").map(Number);
      }
    } catch {
      // p = 0 runs augment nothing; soft_labels.txt is absent.
    }
  }

  const provenance: ProvenanceEntry[] = readFileSync(join(outDir, "provenance.jsonl"), "utf8")
    .split("\n")
    .filter((line) => line.length > 0)
    .map((line) => JSON.parse(line) as ProvenanceEntry);

  return {
    images: { data: images, shape: [...input.images.shape] },
    labels,
    softLabels,
    maps: maps ? { data: maps, shape: [n, h, w] } : undefined,
    masks: masks ? { data: masks, shape: [n, input.numClasses, h, w] } : undefined,
    provenance,
  };
}

function prepare(input: AugmentBatchInput): {
  work: string;
  args: string[];
  n: number;
  outDir: string;
} {
  const { n } = validate(input);
  const work = mkdtempSync(join(tmpdir(), "cutmix-lp-"));
  const manifestPath = stageBatch(join(work, "in"), input);
  const outDir = join(work, "out");
  const args = augmentArgs(
    manifestPath,
    outDir,
    input.config,
    input.seed,
    input.epoch ?? 0,
    input.config.batchSize ?? n,
  );
  return { work, args, n, outDir };
}

/**
 * Augment one batch through the pipeline CLI.
 *
 * Bit-reproducible: equal buffers, config, and seed give equal results,
 * identical to invoking the CLI on the same staged dataset.
 */
export function augmentBatch(input: AugmentBatchInput): AugmentBatchResult {
  const { work, args, n, outDir } = prepare(input);
  try {
    runCliSync(args);
    return packOutputs(outDir, n, input);
  } finally {
    rmSync(work, { recursive: true, force: true });
  }
}

/** Async variant; safe to run concurrently with distinct seeds. */
export async function augmentBatchAsync(
  input: AugmentBatchInput,
): Promise<AugmentBatchResult> {
  const { work, args, n, outDir } = prepare(input);
  try {
    await runCliAsync(args);
    return packOutputs(outDir, n, input);
  } finally {
    rmSync(work, { recursive: true, force: true });
  }
}

/**
 * Threshold a class heatmap stack [L, h, w] into binary activation
 * masks, zeroing planes of classes not listed as present.
 */
export function thresholdHeatmaps(
  heatmaps: Tensor,
  presentClasses: number[],
  tCam: number,
): Tensor {
  checkTensor("heatmaps", heatmaps, 3);
  if (!(heatmaps.data instanceof Float32Array)) {
    throw new ShapeError("heatmaps must be float32");
  }
  const numClasses = heatmaps.shape[0];
  for (const cls of presentClasses) {
    if (!Number.isInteger(cls) || cls < 1 || cls > numClasses) {
      throw new ShapeError(`class ${cls} outside 1..${numClasses}`);
    }
  }
  if (presentClasses.length === 0) {
    throw new ShapeError("presentClasses must name at least one class");
  }
  const work = mkdtempSync(join(tmpdir(), "cutmix-lp-"));
  try {
    const src = join(work, "heat.rten");
    const dst = join(work, "masks.rten");
    writeRtenFile(src, 1, heatmaps.shape, payloadView(heatmaps.data));
    runCliSync([
      "threshold", src,
      "--out", dst,
      "--classes", presentClasses.join(","),
      "--t-cam", String(tCam),
    ]);
    const masks = decodeRten(readFileSync(dst));
    return { data: Uint8Array.from(masks.data as Uint8Array), shape: masks.shape };
  } finally {
    rmSync(work, { recursive: true, force: true });
  }
}
