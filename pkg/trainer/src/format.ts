/**
 * HCUB / HIMG binary formats, byte-compatible with the reconstruction
 * toolkit. Cubes are stored channel fastest: value(row, col, ch) sits at
 * flat index (row*width + col)*channels + ch. Images are row major.
 */

import * as fs from 'fs';

const FORMAT_VERSION = 1;

export interface Cube {
  height: number;
  width: number;
  channels: number;
  /** length height*width*channels, channel fastest */
  data: Float32Array;
}

export interface Image {
  side: number;
  /** length side*side, row major */
  data: Float32Array;
}

function checkFinite(data: Float32Array, what: string): void {
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new Error(`${what} contains a non-finite value at index ${i}`);
    }
  }
}

function readHeader(buf: Buffer, magic: string, path: string): void {
  if (buf.length < 8 || buf.toString('ascii', 0, 4) !== magic) {
    throw new Error(`${path}: bad magic, expected ${magic}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== FORMAT_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
}

function payloadView(buf: Buffer, offset: number, count: number,
                     path: string): Float32Array {
  if (buf.length !== offset + 4 * count) {
    throw new Error(
      `${path}: payload is ${buf.length - offset} bytes, expected ${4 * count}`);
  }
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = buf.readFloatLE(offset + 4 * i);
  }
  checkFinite(out, path);
  return out;
}

export function readCube(path: string): Cube {
  const buf = fs.readFileSync(path);
  readHeader(buf, 'HCUB', path);
  const height = buf.readUInt32LE(8);
  const width = buf.readUInt32LE(12);
  const channels = buf.readUInt32LE(16);
  if (height < 1 || width < 1 || channels < 1) {
    throw new Error(`${path}: invalid dimensions ${height}x${width}x${channels}`);
  }
  const data = payloadView(buf, 20, height * width * channels, path);
  return { height, width, channels, data };
}

export function writeCube(cube: Cube, path: string): void {
  const count = cube.height * cube.width * cube.channels;
  if (cube.data.length !== count) {
    throw new Error(`cube data length ${cube.data.length}, expected ${count}`);
  }
  checkFinite(cube.data, 'cube');
  const buf = Buffer.alloc(20 + 4 * count);
  buf.write('HCUB', 0, 'ascii');
  buf.writeUInt32LE(FORMAT_VERSION, 4);
  buf.writeUInt32LE(cube.height, 8);
  buf.writeUInt32LE(cube.width, 12);
  buf.writeUInt32LE(cube.channels, 16);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(cube.data[i], 20 + 4 * i);
  }
  fs.writeFileSync(path, buf);
}

export function readImage(path: string): Image {
  const buf = fs.readFileSync(path);
  readHeader(buf, 'HIMG', path);
  const height = buf.readUInt32LE(8);
  const width = buf.readUInt32LE(12);
  if (height < 1 || height !== width) {
    throw new Error(`${path}: invalid image dimensions ${height}x${width}`);
  }
  const data = payloadView(buf, 16, height * width, path);
  return { side: height, data };
}

export function writeImage(image: Image, path: string): void {
  const count = image.side * image.side;
  if (image.data.length !== count) {
    throw new Error(`image data length ${image.data.length}, expected ${count}`);
  }
  checkFinite(image.data, 'image');
  const buf = Buffer.alloc(16 + 4 * count);
  buf.write('HIMG', 0, 'ascii');
  buf.writeUInt32LE(FORMAT_VERSION, 4);
  buf.writeUInt32LE(image.side, 8);
  buf.writeUInt32LE(image.side, 12);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(image.data[i], 16 + 4 * i);
  }
  fs.writeFileSync(path, buf);
}
