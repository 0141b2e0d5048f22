import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  AugmentBatchInput,
  AugmentBatchResult,
  CliError,
  ShapeError,
  augmentArgs,
  augmentBatch,
  augmentBatchAsync,
  cliCommand,
  stageBatch,
} from "../src/index.js";
import { encodeRten } from "../src/rten.js";

/** Deterministic PRNG so generated fixtures are reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const N = 4;
const C = 2;
const H = 8;
const W = 8;
const L = 4;

function randomBatch(
  seed: number,
  policy: "naive" | "lp_map" | "lp_xai",
  boxRange: [number, number],
  p: number,
): AugmentBatchInput {
  const rand = mulberry32(seed * 2654435761 + 1);
  const images = new Uint8Array(N * C * H * W);
  for (let i = 0; i < images.length; i += 1) images[i] = Math.floor(rand() * 256);

  const labels: number[][] = [];
  const input: AugmentBatchInput = {
    images: { data: images, shape: [N, C, H, W] },
    labels,
    numClasses: L,
    config: { policy, boxRange, p, tMap: 1 },
    seed,
  };

  if (policy === "lp_map" || policy === "naive") {
    const maps = new Uint8Array(N * H * W);
    for (let i = 0; i < maps.length; i += 1) maps[i] = Math.floor(rand() * (L + 1));
    input.maps = { data: maps, shape: [N, H, W] };
    for (let s = 0; s < N; s += 1) {
      const present = new Set<number>();
      for (let j = 0; j < H * W; j += 1) {
        const value = maps[s * H * W + j];
        if (value > 0) present.add(value);
      }
      if (present.size === 0) {
        maps[s * H * W] = 1;
        present.add(1);
      }
      labels.push([...present].sort((a, b) => a - b));
    }
  } else {
    const masks = new Uint8Array(N * L * H * W);
    for (let s = 0; s < N; s += 1) {
      const present = new Set<number>();
      while (present.size === 0) present.add(1 + Math.floor(rand() * L));
      if (rand() < 0.7) present.add(1 + Math.floor(rand() * L));
      labels.push([...present].sort((a, b) => a - b));
      for (const cls of present) {
        const base = s * L * H * W + (cls - 1) * H * W;
        for (let j = 0; j < H * W; j += 1) {
          masks[base + j] = rand() < 0.3 ? 1 : 0;
        }
      }
    }
    input.masks = { data: masks, shape: [N, L, H, W] };
  }
  return input;
}

function runCliDirect(input: AugmentBatchInput): string {
  const work = mkdtempSync(join(tmpdir(), "cutmix-direct-"));
  const manifest = stageBatch(join(work, "in"), input);
  const outDir = join(work, "out");
  const [command, ...prefix] = cliCommand();
  execFileSync(command, [
    ...prefix,
    ...augmentArgs(manifest, outDir, input.config, input.seed, input.epoch ?? 0, N),
  ]);
  return outDir;
}

function sampleId(i: number): string {
  return `s${i.toString().padStart(4, "0")}`;
}

function expectByteIdentical(result: AugmentBatchResult, outDir: string, policy: string) {
  for (let i = 0; i < N; i += 1) {
    const fromCli = readFileSync(join(outDir, "images", `${sampleId(i)}.rten`));
    const slice = (result.images.data as Uint8Array).subarray(
      i * C * H * W,
      (i + 1) * C * H * W,
    );
    const reEncoded = encodeRten({ data: slice, shape: [C, H, W] });
    expect(reEncoded.equals(fromCli)).toBe(true);
    if (policy === "lp_map") {
      const mapFromCli = readFileSync(join(outDir, "maps", `${sampleId(i)}.rten`));
      const mapSlice = (result.maps!.data as Uint8Array).subarray(
        i * H * W,
        (i + 1) * H * W,
      );
      expect(encodeRten({ data: mapSlice, shape: [H, W] }).equals(mapFromCli)).toBe(true);
    }
  }
  const labelLines = readFileSync(join(outDir, "labels.txt"), "utf8")
    .trim()
    .split("\n");
  const expected = result.labels
    .map((classes, i) => `${sampleId(i)}\t${classes.join(",")}`)
    .join("\n");
  expect(labelLines.join("\n")).toBe(expected);
}

const PAPER_RANGES: [number, number][] = [
  [0.1, 0.3], [0.1, 0.5], [0.1, 0.7], [0.3, 0.5], [0.3, 0.7],
];

describe("binding/CLI equivalence", () => {
  it("matches direct CLI output byte-for-byte over 100 random seeds and configs", () => {
    for (let run = 0; run < 100; run += 1) {
      const pick = mulberry32(run + 17);
      const policy = (["lp_map", "lp_map", "lp_map", "lp_xai", "naive"] as const)[
        Math.floor(pick() * 5)
      ];
      const boxRange = PAPER_RANGES[Math.floor(pick() * PAPER_RANGES.length)];
      const p = pick() < 0.5 ? 0.5 : 1.0;
      const input = randomBatch(run, policy, boxRange, p);
      const result = augmentBatch(input);
      const outDir = runCliDirect(input);
      try {
        expectByteIdentical(result, outDir, policy);
      } finally {
        rmSync(join(outDir, ".."), { recursive: true, force: true });
      }
    }
  });

  it("p=0 returns the input buffers unchanged", () => {
    const input = randomBatch(1, "lp_map", [0.3, 0.7], 0);
    const result = augmentBatch(input);
    expect(Buffer.from(result.images.data as Uint8Array)
      .equals(Buffer.from(input.images.data as Uint8Array))).toBe(true);
    expect(result.labels).toEqual(input.labels);
    expect(result.provenance.every((entry) => !entry.augmented)).toBe(true);
  });

  it("p=1 augments every sample with its provenance recorded", () => {
    const input = randomBatch(2, "lp_map", [0.3, 0.7], 1);
    const result = augmentBatch(input);
    expect(result.provenance).toHaveLength(N);
    for (const entry of result.provenance) {
      expect(entry.augmented).toBe(true);
      expect(entry.sources).toHaveLength(2);
      expect(entry.sources![0]).not.toBe(entry.sources![1]);
      expect(entry.box1).toHaveLength(4);
    }
  });

  it("naive policy returns soft labels", () => {
    const input = randomBatch(3, "naive", [0.3, 0.7], 1);
    const result = augmentBatch(input);
    expect(result.softLabels).toBeDefined();
    for (const weights of result.softLabels!) {
      expect(weights).toHaveLength(L);
      for (const weight of weights) {
        expect(weight).toBeGreaterThanOrEqual(0);
        expect(weight).toBeLessThanOrEqual(1);
      }
    }
  });

  it("async variant equals the sync result and runs concurrently", async () => {
    const inputs = [4, 5, 6].map((seed) => randomBatch(seed, "lp_map", [0.3, 0.7], 1));
    const [a, b, c] = await Promise.all(inputs.map((input) => augmentBatchAsync(input)));
    const syncResults = inputs.map((input) => augmentBatch(input));
    const results = [a, b, c];
    for (let i = 0; i < 3; i += 1) {
      expect(Buffer.from(results[i].images.data as Uint8Array)
        .equals(Buffer.from(syncResults[i].images.data as Uint8Array))).toBe(true);
      expect(results[i].labels).toEqual(syncResults[i].labels);
    }
  });

  it("mutating inputs after the call never changes returned outputs", () => {
    const input = randomBatch(7, "lp_map", [0.3, 0.7], 1);
    const result = augmentBatch(input);
    const imageCopy = Buffer.from(result.images.data as Uint8Array);
    const mapCopy = Buffer.from(result.maps!.data as Uint8Array);
    (input.images.data as Uint8Array).fill(0);
    (input.maps!.data as Uint8Array).fill(0);
    expect(Buffer.from(result.images.data as Uint8Array).equals(imageCopy)).toBe(true);
    expect(Buffer.from(result.maps!.data as Uint8Array).equals(mapCopy)).toBe(true);
  });
});

describe("malformed inputs raise", () => {
  const base = () => randomBatch(9, "lp_map", [0.3, 0.7], 1);

  it("label list length mismatch", () => {
    const input = base();
    input.labels = input.labels.slice(0, N - 1);
    expect(() => augmentBatch(input)).toThrow(ShapeError);
  });

  it("label class exceeding the class count names the expected range", () => {
    const input = base();
    input.labels[0] = [L + 3];
    expect(() => augmentBatch(input)).toThrow(`expected 1..${L}`);
  });

  it("wrong image rank", () => {
    const input = base();
    input.images = { data: input.images.data, shape: [N, C, H * W] };
    expect(() => augmentBatch(input)).toThrow(ShapeError);
  });

  it("buffer length disagreeing with shape", () => {
    const input = base();
    input.images = {
      data: (input.images.data as Uint8Array).subarray(0, 100),
      shape: [N, C, H, W],
    };
    expect(() => augmentBatch(input)).toThrow(ShapeError);
  });

  it("map geometry mismatch", () => {
    const input = base();
    input.maps = { data: new Uint8Array(N * H * (W - 1)), shape: [N, H, W - 1] };
    expect(() => augmentBatch(input)).toThrow(ShapeError);
  });

  it("mask plane count mismatch", () => {
    const input = randomBatch(10, "lp_xai", [0.3, 0.7], 1);
    input.masks = { data: new Uint8Array(N * (L + 1) * H * W), shape: [N, L + 1, H, W] };
    expect(() => augmentBatch(input)).toThrow(`expected ${L}`);
  });

  it("map values beyond the class count surface the CLI diagnostic", () => {
    const input = base();
    (input.maps!.data as Uint8Array)[0] = L + 5;
    expect(() => augmentBatch(input)).toThrow(CliError);
    try {
      augmentBatch(input);
    } catch (error) {
      expect((error as CliError).message).toContain(`${L + 5}`);
    }
  });

  it("policy without its positional data surfaces the CLI diagnostic", () => {
    const input = base();
    delete input.maps;
    expect(() => augmentBatch(input)).toThrow(CliError);
  });
});
