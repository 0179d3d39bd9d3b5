// Wire framing for the denoiser protocol. All integers little-endian.
// A connection opens with a fixed-size handshake, then alternates PREDICT
// requests and responses; any violation is answered with one ERROR frame.

export const MAGIC = Buffer.from("SDNP", "ascii");
export const VERSION = 1;

export const HANDSHAKE_REQ_SIZE = 8; // magic u32, version u16, flags u16
export const HANDSHAKE_RESP_SIZE = 13; // magic, version, max_batch, h, w u16s, channels u8
export const PREDICT_HEADER_SIZE = 12; // type u8, t u32, batch u16, h u16, w u16, channels u8

export const TYPE_PREDICT_REQ = 1;
export const TYPE_PREDICT_RESP = 2;
export const TYPE_ERROR = 255;

export const ERR_MALFORMED = 1;
export const ERR_SHAPE = 2;
export const ERR_MODEL = 3;

export interface PredictHeader {
  type: number;
  t: number;
  batch: number;
  h: number;
  w: number;
  channels: number;
}

export interface HandshakeRequest {
  magicOk: boolean;
  version: number;
  flags: number;
}

export function decodeHandshakeRequest(buf: Buffer): HandshakeRequest {
  return {
    magicOk: buf.subarray(0, 4).equals(MAGIC),
    version: buf.readUInt16LE(4),
    flags: buf.readUInt16LE(6),
  };
}

export function encodeHandshakeResponse(maxBatch: number, h: number, w: number, channels: number): Buffer {
  const out = Buffer.alloc(HANDSHAKE_RESP_SIZE);
  MAGIC.copy(out, 0);
  out.writeUInt16LE(VERSION, 4);
  out.writeUInt16LE(maxBatch, 6);
  out.writeUInt16LE(h, 8);
  out.writeUInt16LE(w, 10);
  out.writeUInt8(channels, 12);
  return out;
}

export function decodePredictHeader(buf: Buffer): PredictHeader {
  return {
    type: buf.readUInt8(0),
    t: buf.readUInt32LE(1),
    batch: buf.readUInt16LE(5),
    h: buf.readUInt16LE(7),
    w: buf.readUInt16LE(9),
    channels: buf.readUInt8(11),
  };
}

export function encodePredictResponseHeader(hdr: PredictHeader): Buffer {
  const out = Buffer.alloc(PREDICT_HEADER_SIZE);
  out.writeUInt8(TYPE_PREDICT_RESP, 0);
  out.writeUInt32LE(hdr.t, 1);
  out.writeUInt16LE(hdr.batch, 5);
  out.writeUInt16LE(hdr.h, 7);
  out.writeUInt16LE(hdr.w, 9);
  out.writeUInt8(hdr.channels, 11);
  return out;
}

export function payloadSize(hdr: PredictHeader): number {
  return hdr.batch * hdr.h * hdr.w * hdr.channels * 4;
}

export function encodeError(code: number, message: string): Buffer {
  const msg = Buffer.from(message, "utf-8");
  const out = Buffer.alloc(7 + msg.length);
  out.writeUInt8(TYPE_ERROR, 0);
  out.writeUInt16LE(code, 1);
  out.writeUInt32LE(msg.length, 3);
  msg.copy(out, 7);
  return out;
}
