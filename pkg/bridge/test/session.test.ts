import { describe, expect, it } from "vitest";

import {
  ERR_MALFORMED,
  ERR_MODEL,
  ERR_SHAPE,
  MAGIC,
  PREDICT_HEADER_SIZE,
  TYPE_ERROR,
  TYPE_PREDICT_RESP,
  VERSION,
} from "../src/frame";
import { EchoMode, ZeroMode, Mode } from "../src/modes";
import { Session, SessionConfig } from "../src/session";

function makeSession(mode: Mode = new EchoMode(), h = 8, w = 16, maxBatch = 4) {
  const frames: Buffer[] = [];
  const config: SessionConfig = { mode, h, w, channels: 2, maxBatch };
  const session = new Session(config, (data) => frames.push(Buffer.from(data)));
  return { session, frames };
}

function handshake(): Buffer {
  const buf = Buffer.alloc(8);
  MAGIC.copy(buf, 0);
  buf.writeUInt16LE(VERSION, 4);
  return buf;
}

function predictRequest(t: number, batch: number, h: number, w: number, payload?: Buffer): Buffer {
  const hdr = Buffer.alloc(PREDICT_HEADER_SIZE);
  hdr.writeUInt8(1, 0);
  hdr.writeUInt32LE(t, 1);
  hdr.writeUInt16LE(batch, 5);
  hdr.writeUInt16LE(h, 7);
  hdr.writeUInt16LE(w, 9);
  hdr.writeUInt8(2, 11);
  const body = payload ?? Buffer.alloc(batch * h * w * 2 * 4);
  return Buffer.concat([hdr, body]);
}

describe("handshake handling", () => {
  it("answers a valid handshake with advertised dims", () => {
    const { session, frames } = makeSession();
    session.feed(handshake());
    expect(frames).toHaveLength(1);
    expect(frames[0].readUInt16LE(8)).toBe(8);
    expect(frames[0].readUInt16LE(10)).toBe(16);
    expect(session.closed).toBe(false);
  });

  it("rejects a wrong magic with ERROR 1 and closes", () => {
    const { session, frames } = makeSession();
    session.feed(Buffer.from("NOPE\x01\x00\x00\x00", "latin1"));
    expect(frames).toHaveLength(1);
    expect(frames[0].readUInt8(0)).toBe(TYPE_ERROR);
    expect(frames[0].readUInt16LE(1)).toBe(ERR_MALFORMED);
    expect(session.closed).toBe(true);
  });

  it("rejects a version mismatch", () => {
    const { session, frames } = makeSession();
    const bad = handshake();
    bad.writeUInt16LE(9, 4);
    session.feed(bad);
    expect(frames[0].readUInt16LE(1)).toBe(ERR_MALFORMED);
    expect(session.closed).toBe(true);
  });

  it("tolerates byte-at-a-time delivery", () => {
    const { session, frames } = makeSession();
    for (const byte of handshake()) session.feed(Buffer.from([byte]));
    expect(frames).toHaveLength(1);
    expect(session.closed).toBe(false);
  });
});

describe("predict handling", () => {
  it("echo returns the exact payload", () => {
    const { session, frames } = makeSession();
    session.feed(handshake());
    const payload = Buffer.from(new Float32Array([1.5, -2.25, 3, 4]).buffer);
    const full = Buffer.alloc(2 * 8 * 16 * 2 * 4);
    payload.copy(full, 0);
    session.feed(predictRequest(7, 2, 8, 16, full));
    expect(frames).toHaveLength(2);
    const resp = frames[1];
    expect(resp.readUInt8(0)).toBe(TYPE_PREDICT_RESP);
    expect(resp.readUInt32LE(1)).toBe(7);
    expect(resp.subarray(PREDICT_HEADER_SIZE).equals(full)).toBe(true);
  });

  it("zero returns zeros of equal size", () => {
    const { session, frames } = makeSession(new ZeroMode());
    session.feed(handshake());
    const full = Buffer.alloc(1 * 8 * 16 * 2 * 4, 0xab);
    session.feed(predictRequest(1, 1, 8, 16, full));
    const body = frames[1].subarray(PREDICT_HEADER_SIZE);
    expect(body.length).toBe(full.length);
    expect(body.every((b) => b === 0)).toBe(true);
  });

  it("serves several requests on one session", () => {
    const { session, frames } = makeSession();
    session.feed(handshake());
    for (let i = 0; i < 5; i++) session.feed(predictRequest(i + 1, 1, 8, 16));
    expect(frames).toHaveLength(6);
    expect(session.closed).toBe(false);
  });

  it("rejects a shape mismatch with ERROR 2", () => {
    const { session, frames } = makeSession();
    session.feed(handshake());
    session.feed(predictRequest(1, 1, 4, 4));
    expect(frames[1].readUInt8(0)).toBe(TYPE_ERROR);
    expect(frames[1].readUInt16LE(1)).toBe(ERR_SHAPE);
    expect(session.closed).toBe(true);
  });

  it("rejects an oversized batch with ERROR 2", () => {
    const { session, frames } = makeSession();
    session.feed(handshake());
    session.feed(predictRequest(1, 99, 8, 16, Buffer.alloc(0)));
    expect(frames[1].readUInt16LE(1)).toBe(ERR_SHAPE);
  });

  it("rejects an unknown frame type with ERROR 1", () => {
    const { session, frames } = makeSession();
    session.feed(handshake());
    session.feed(Buffer.from([42]));
    expect(frames[1].readUInt8(0)).toBe(TYPE_ERROR);
    expect(frames[1].readUInt16LE(1)).toBe(ERR_MALFORMED);
  });

  it("maps mode exceptions to ERROR 3", () => {
    const throwing: Mode = {
      dims: () => null,
      predict: () => {
        throw new Error("model exploded");
      },
    };
    const { session, frames } = makeSession(throwing);
    session.feed(handshake());
    session.feed(predictRequest(1, 1, 8, 16));
    expect(frames[1].readUInt16LE(1)).toBe(ERR_MODEL);
    expect(session.closed).toBe(true);
  });
});

describe("malformed-frame fuzzing", () => {
  it("answers 1000 malformed complete frames with exactly one ERROR each", () => {
    let seed = 0x2545f491;
    const rand = () => {
      // xorshift, deterministic across runs
      seed ^= seed << 13;
      seed ^= seed >>> 17;
      seed ^= seed << 5;
      return (seed >>> 0) / 0xffffffff;
    };
    for (let i = 0; i < 1000; i++) {
      const { session, frames } = makeSession();
      const kind = i % 4;
      if (kind === 0) {
        const junk = Buffer.alloc(8);
        for (let j = 0; j < 8; j++) junk[j] = Math.floor(rand() * 256);
        junk[0] = 0x00; // never a valid magic
        session.feed(junk);
      } else if (kind === 1) {
        const bad = handshake();
        bad.writeUInt16LE(2 + Math.floor(rand() * 1000), 4);
        session.feed(bad);
      } else if (kind === 2) {
        session.feed(handshake());
        session.feed(Buffer.from([2 + Math.floor(rand() * 253)]));
      } else {
        session.feed(handshake());
        session.feed(predictRequest(1, 1, 1 + Math.floor(rand() * 7), 1 + Math.floor(rand() * 15)));
      }
      const errors = frames.filter((f) => f.readUInt8(0) === TYPE_ERROR);
      expect(errors).toHaveLength(1);
      expect(session.closed).toBe(true);
      // Feeding more bytes after close must be a no-op, not a crash.
      session.feed(Buffer.alloc(64, 0xff));
      expect(frames.filter((f) => f.readUInt8(0) === TYPE_ERROR)).toHaveLength(1);
    }
  });

  it("survives truncated frames without responding", () => {
    const { session, frames } = makeSession();
    session.feed(Buffer.from("SD", "ascii"));
    expect(frames).toHaveLength(0);
    expect(session.closed).toBe(false);
    session.close();
    expect(session.closed).toBe(true);
  });
});
