// Per-connection protocol state machine, transport-agnostic: bytes in via
// feed(), frames out via the write callback. Any malformed input is
// answered with exactly one ERROR frame, after which the session closes
// (a byte stream cannot be resynchronized past a framing error).

import {
  ERR_MALFORMED,
  ERR_MODEL,
  ERR_SHAPE,
  HANDSHAKE_REQ_SIZE,
  PREDICT_HEADER_SIZE,
  TYPE_PREDICT_REQ,
  VERSION,
  decodeHandshakeRequest,
  decodePredictHeader,
  encodeError,
  encodeHandshakeResponse,
  encodePredictResponseHeader,
  payloadSize,
  PredictHeader,
} from "./frame";
import { Mode } from "./modes";

export interface SessionConfig {
  mode: Mode;
  h: number;
  w: number;
  channels: number;
  maxBatch: number;
}

type State = "handshake" | "type" | "header" | "payload" | "closed";

export class Session {
  private buf: Buffer = Buffer.alloc(0);
  private state: State = "handshake";
  private pendingHeader: PredictHeader | null = null;
  readonly dims: { h: number; w: number; channels: number };

  constructor(
    private readonly config: SessionConfig,
    private readonly write: (data: Buffer) => void,
    private readonly onClose: () => void = () => undefined,
  ) {
    this.dims = config.mode.dims() ?? { h: config.h, w: config.w, channels: config.channels };
  }

  get closed(): boolean {
    return this.state === "closed";
  }

  private fail(code: number, message: string): void {
    this.write(encodeError(code, message));
    this.close();
  }

  close(): void {
    if (this.state !== "closed") {
      this.state = "closed";
      this.buf = Buffer.alloc(0);
      this.onClose();
    }
  }

  feed(data: Buffer): void {
    if (this.closed) return;
    this.buf = this.buf.length ? Buffer.concat([this.buf, data]) : Buffer.from(data);
    let progressed = true;
    while (progressed && !this.closed) {
      progressed = this.step();
    }
  }

  private take(n: number): Buffer | null {
    if (this.buf.length < n) return null;
    const head = this.buf.subarray(0, n);
    this.buf = this.buf.subarray(n);
    return head;
  }

  private step(): boolean {
    switch (this.state) {
      case "handshake": {
        const head = this.take(HANDSHAKE_REQ_SIZE);
        if (!head) return false;
        const req = decodeHandshakeRequest(head);
        if (!req.magicOk) {
          this.fail(ERR_MALFORMED, "bad handshake magic");
          return false;
        }
        if (req.version !== VERSION) {
          this.fail(ERR_MALFORMED, `unsupported protocol version ${req.version}`);
          return false;
        }
        this.write(
          encodeHandshakeResponse(this.config.maxBatch, this.dims.h, this.dims.w, this.dims.channels),
        );
        this.state = "type";
        return true;
      }
      case "type": {
        if (this.buf.length < 1) return false;
        const type = this.buf.readUInt8(0);
        if (type !== TYPE_PREDICT_REQ) {
          this.fail(ERR_MALFORMED, `unexpected frame type ${type}`);
          return false;
        }
        this.state = "header";
        return true;
      }
      case "header": {
        const head = this.take(PREDICT_HEADER_SIZE);
        if (!head) return false;
        const hdr = decodePredictHeader(head);
        if (hdr.h !== this.dims.h || hdr.w !== this.dims.w || hdr.channels !== this.dims.channels) {
          this.fail(
            ERR_SHAPE,
            `request is ${hdr.batch}x${hdr.h}x${hdr.w}x${hdr.channels}, endpoint serves ` +
              `${this.dims.h}x${this.dims.w}x${this.dims.channels}`,
          );
          return false;
        }
        if (hdr.batch < 1 || hdr.batch > this.config.maxBatch) {
          this.fail(ERR_SHAPE, `batch ${hdr.batch} outside [1, ${this.config.maxBatch}]`);
          return false;
        }
        this.pendingHeader = hdr;
        this.state = "payload";
        return true;
      }
      case "payload": {
        const hdr = this.pendingHeader as PredictHeader;
        const payload = this.take(payloadSize(hdr));
        if (!payload) return false;
        let result: Buffer;
        try {
          result = this.config.mode.predict(payload, hdr);
        } catch (err) {
          this.fail(ERR_MODEL, err instanceof Error ? err.message : String(err));
          return false;
        }
        this.write(Buffer.concat([encodePredictResponseHeader(hdr), result]));
        this.pendingHeader = null;
        this.state = "type";
        return true;
      }
      default:
        return false;
    }
  }
}
