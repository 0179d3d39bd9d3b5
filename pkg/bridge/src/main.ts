#!/usr/bin/env node
// Denoiser endpoint CLI. stdio transport serves exactly one session on
// stdin/stdout (diagnostics go to stderr); tcp accepts connections one
// session each, surviving per-connection protocol errors.

import * as net from "node:net";
import { parseArgs } from "node:util";

import { makeMode } from "./modes";
import { Session, SessionConfig } from "./session";

function usageExit(message: string): never {
  process.stderr.write(`sdnp-bridge: ${message}\n`);
  process.stderr.write(
    "usage: sdnp-bridge --mode echo|zero|oracle|model [--model-path p] " +
      "--transport stdio|tcp [--port n] [--height n] [--width n] [--max-batch n]\n",
  );
  process.exit(2);
}

function buildConfig(): { config: SessionConfig; transport: string; port: number } {
  let values: Record<string, string | undefined>;
  try {
    values = parseArgs({
      options: {
        mode: { type: "string", default: "echo" },
        "model-path": { type: "string" },
        transport: { type: "string", default: "stdio" },
        port: { type: "string", default: "7464" },
        height: { type: "string", default: "64" },
        width: { type: "string", default: "1024" },
        "max-batch": { type: "string", default: "64" },
      },
    }).values as Record<string, string | undefined>;
  } catch (err) {
    usageExit(err instanceof Error ? err.message : String(err));
  }
  const transport = values.transport as string;
  if (transport !== "stdio" && transport !== "tcp") {
    usageExit(`unknown transport ${transport}`);
  }
  let mode;
  try {
    mode = makeMode(values.mode as string, values["model-path"]);
  } catch (err) {
    usageExit(err instanceof Error ? err.message : String(err));
  }
  const config: SessionConfig = {
    mode,
    h: Number(values.height),
    w: Number(values.width),
    channels: 2,
    maxBatch: Number(values["max-batch"]),
  };
  if (!Number.isInteger(config.h) || !Number.isInteger(config.w) || config.h < 1 || config.w < 1) {
    usageExit("height/width must be positive integers");
  }
  return { config, transport, port: Number(values.port) };
}

function serveStdio(config: SessionConfig): void {
  const session = new Session(
    config,
    (data) => process.stdout.write(data),
    () => process.exit(0),
  );
  process.stdin.on("data", (chunk) => session.feed(chunk));
  process.stdin.on("end", () => process.exit(0));
}

function serveTcp(config: SessionConfig, port: number): void {
  const server = net.createServer((conn) => {
    const session = new Session(
      config,
      (data) => conn.write(data),
      () => conn.end(),
    );
    conn.on("data", (chunk) => session.feed(chunk));
    conn.on("error", () => conn.destroy());
    conn.on("close", () => session.close());
  });
  server.on("error", (err) => {
    process.stderr.write(`sdnp-bridge: server error: ${err.message}\n`);
    process.exit(1);
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address() as net.AddressInfo;
    process.stderr.write(`sdnp-bridge listening on ${addr.port}\n`);
  });
}

function main(): void {
  const { config, transport, port } = buildConfig();
  if (transport === "stdio") {
    serveStdio(config);
  } else {
    serveTcp(config, port);
  }
}

main();
