// Prediction backends behind the wire protocol. Payloads are raw
// little-endian float32 buffers; echo and zero never interpret them,
// the oracle reads and writes per element through a DataView so the
// result is independent of the host's native byte order.

import { readFileSync } from "node:fs";

import { PredictHeader, payloadSize } from "./frame";

export interface Mode {
  /** Advertised image dimensions, or null to use the CLI defaults. */
  dims(): { h: number; w: number; channels: number } | null;
  predict(payload: Buffer, hdr: PredictHeader): Buffer;
}

export class EchoMode implements Mode {
  dims() {
    return null;
  }
  predict(payload: Buffer): Buffer {
    return payload;
  }
}

export class ZeroMode implements Mode {
  dims() {
    return null;
  }
  predict(payload: Buffer): Buffer {
    return Buffer.alloc(payload.length);
  }
}

interface OracleSidecar {
  h: number;
  w: number;
  channels: number;
  alpha_bar: number[];
  x0: number[];
}

export class OracleMode implements Mode {
  private readonly sidecar: OracleSidecar;

  constructor(modelPath: string) {
    const doc = JSON.parse(readFileSync(modelPath, "utf-8")) as OracleSidecar;
    if (
      !Number.isInteger(doc.h) ||
      !Number.isInteger(doc.w) ||
      !Array.isArray(doc.alpha_bar) ||
      !Array.isArray(doc.x0) ||
      doc.x0.length !== doc.h * doc.w * doc.channels
    ) {
      throw new Error(`malformed oracle sidecar ${modelPath}`);
    }
    this.sidecar = doc;
  }

  dims() {
    return { h: this.sidecar.h, w: this.sidecar.w, channels: this.sidecar.channels };
  }

  predict(payload: Buffer, hdr: PredictHeader): Buffer {
    const steps = this.sidecar.alpha_bar.length - 1;
    if (hdr.t < 1 || hdr.t > steps) {
      throw new Error(`t=${hdr.t} outside schedule [1, ${steps}]`);
    }
    const ab = this.sidecar.alpha_bar[hdr.t];
    const s1 = Math.sqrt(ab);
    const s2 = Math.sqrt(1.0 - ab);
    const perImage = this.sidecar.x0.length;
    const out = Buffer.alloc(payload.length);
    const view = new DataView(payload.buffer, payload.byteOffset, payload.length);
    const outView = new DataView(out.buffer, out.byteOffset, out.length);
    const n = payload.length / 4;
    for (let i = 0; i < n; i++) {
      const x = view.getFloat32(i * 4, true);
      const x0 = this.sidecar.x0[i % perImage];
      outView.setFloat32(i * 4, Math.fround((x - s1 * x0) / s2), true);
    }
    return out;
  }
}

export interface ModelModule {
  predict(input: Float32Array, t: number, shape: { batch: number; h: number; w: number; channels: number }): Float32Array;
}

export class ModelMode implements Mode {
  private readonly model: ModelModule;

  constructor(modelPath: string) {
    // eslint-disable-next-line @typescript-eslint/no-var-requires
    const mod = require(modelPath) as Partial<ModelModule>;
    if (typeof mod.predict !== "function") {
      throw new Error(`model module ${modelPath} does not export predict()`);
    }
    this.model = mod as ModelModule;
  }

  dims() {
    return null;
  }

  predict(payload: Buffer, hdr: PredictHeader): Buffer {
    const copy = new Uint8Array(payload); // aligned copy, safe to view as f32
    const input = new Float32Array(copy.buffer);
    const result = this.model.predict(input, hdr.t, {
      batch: hdr.batch,
      h: hdr.h,
      w: hdr.w,
      channels: hdr.channels,
    });
    if (result.length * 4 !== payloadSize(hdr)) {
      throw new Error(`model returned ${result.length} values, expected ${payloadSize(hdr) / 4}`);
    }
    return Buffer.from(result.buffer, result.byteOffset, result.length * 4);
  }
}

export function makeMode(name: string, modelPath?: string): Mode {
  switch (name) {
    case "echo":
      return new EchoMode();
    case "zero":
      return new ZeroMode();
    case "oracle":
      if (!modelPath) throw new Error("oracle mode requires --model-path");
      return new OracleMode(modelPath);
    case "model":
      if (!modelPath) throw new Error("model mode requires --model-path");
      return new ModelMode(modelPath);
    default:
      throw new Error(`unknown mode ${name}`);
  }
}
