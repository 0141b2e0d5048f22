/**
 * RTEN codec: the raw tensor format the augmentation CLI reads and writes.
 *
 *   magic   4 bytes  "RTEN"
 *   version 1 byte   (1)
 *   dtype   1 byte   0 = uint8, 1 = float32 little-endian
 *   rank    1 byte
 *   dims    rank x u32 little-endian
 *   payload row-major element bytes
 *
 * Encoding wraps the caller's typed array without copying it; decoding
 * returns a view into the source buffer whenever alignment allows.
 */

import {
  RtenBadMagicError,
  RtenDimOverflowError,
  RtenError,
  RtenTruncatedError,
} from "./errors.js";

export type TensorData = Uint8Array | Float32Array;

export interface Tensor {
  data: TensorData;
  shape: number[];
}

const MAGIC = Buffer.from("RTEN", "ascii");
const VERSION = 1;
const MAX_RANK = 8;
const MAX_PAYLOAD = 2 ** 40;

export function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

function dtypeCode(data: TensorData): number {
  if (data instanceof Uint8Array) return 0;
  if (data instanceof Float32Array) return 1;
  throw new RtenError("RTEN stores Uint8Array or Float32Array data");
}

export function encodeHeader(dtype: number, shape: number[]): Buffer {
  if (shape.length > MAX_RANK) {
    throw new RtenError(`rank ${shape.length} exceeds maximum ${MAX_RANK}`);
  }
  const header = Buffer.alloc(7 + 4 * shape.length);
  MAGIC.copy(header, 0);
  header.writeUInt8(VERSION, 4);
  header.writeUInt8(dtype, 5);
  header.writeUInt8(shape.length, 6);
  shape.forEach((dim, i) => {
    if (!Number.isInteger(dim) || dim < 0 || dim >= 2 ** 32) {
      throw new RtenDimOverflowError(`dimension ${dim} does not fit in u32`);
    }
    header.writeUInt32LE(dim, 7 + 4 * i);
  });
  return header;
}

/** Zero-copy view of the tensor payload as a Buffer. */
export function payloadView(data: TensorData): Buffer {
  return Buffer.from(data.buffer, data.byteOffset, data.byteLength);
}

export function encodeRten(tensor: Tensor): Buffer {
  const { data, shape } = tensor;
  if (elementCount(shape) !== data.length) {
    throw new RtenError(
      `shape [${shape}] implies ${elementCount(shape)} elements, data has ${data.length}`,
    );
  }
  return Buffer.concat([encodeHeader(dtypeCode(data), shape), payloadView(data)]);
}

export function decodeRten(blob: Buffer): Tensor {
  if (blob.length < 4 || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new RtenBadMagicError("not an RTEN blob (bad magic)");
  }
  if (blob.length < 7) {
    throw new RtenTruncatedError("truncated header");
  }
  const version = blob.readUInt8(4);
  if (version !== VERSION) {
    throw new RtenError(`unsupported RTEN version ${version}`);
  }
  const code = blob.readUInt8(5);
  if (code !== 0 && code !== 1) {
    throw new RtenError(`unknown dtype code ${code}`);
  }
  const rank = blob.readUInt8(6);
  if (rank > MAX_RANK) {
    throw new RtenDimOverflowError(`rank ${rank} exceeds maximum ${MAX_RANK}`);
  }
  if (blob.length < 7 + 4 * rank) {
    throw new RtenTruncatedError("truncated dimension list");
  }
  const shape: number[] = [];
  for (let i = 0; i < rank; i += 1) {
    shape.push(blob.readUInt32LE(7 + 4 * i));
  }
  const count = elementCount(shape);
  const itemSize = code === 0 ? 1 : 4;
  if (count * itemSize > MAX_PAYLOAD) {
    throw new RtenDimOverflowError(`payload of ${count} elements is implausible`);
  }
  const offset = 7 + 4 * rank;
  const expected = count * itemSize;
  const available = blob.length - offset;
  if (available < expected) {
    throw new RtenTruncatedError(
      `truncated payload (${available} of ${expected} bytes)`,
    );
  }
  if (available > expected) {
    throw new RtenError(`${available - expected} trailing bytes`);
  }
  if (code === 0) {
    return { data: new Uint8Array(blob.buffer, blob.byteOffset + offset, count), shape };
  }
  const start = blob.byteOffset + offset;
  if (start % 4 === 0) {
    return { data: new Float32Array(blob.buffer, start, count), shape };
  }
  // Unaligned float payload (header is 7 + 4*rank bytes): copy once.
  const aligned = new Uint8Array(expected);
  aligned.set(new Uint8Array(blob.buffer, start, expected));
  return { data: new Float32Array(aligned.buffer), shape };
}
