// Contract tests against the real server: the client-side palette filter must
// equal the server's filter for every question type, and a full steering flow
// must leave the documented history path.

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Api } from "../src/api.js";
import { allowedForQuestion } from "../src/restrictions.js";
import { buildPayload, emptyBuilder, togglePredicate } from "../src/questionBuilder.js";
import { pathToCurrent } from "../src/sessionView.js";
import type { QuestionType } from "../src/types.js";

let server: ChildProcess;
let base = "";

beforeAll(async () => {
  server = spawn("python3", ["-m", "boxplain.cli", "serve", "--port", "0"], {
    cwd: "..",
    stdio: ["ignore", "pipe", "inherit"],
  });
  base = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 60_000);
    server.stdout!.on("data", (chunk: Buffer) => {
      const m = chunk.toString().match(/listening on ([\d.]+:\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(`http://${m[1]}`);
      }
    });
    server.on("exit", (code) => reject(new Error(`server exited early: ${code}`)));
  });
}, 90_000);

afterAll(() => {
  server?.kill();
});

describe("palette filter contract", () => {
  const types: QuestionType[] = ["when_do_you", "what_do_you_do_when", "circumstances"];

  it.each(types)("client filter equals server filter for %s", async (qtype) => {
    const api = new Api(base);
    const all = await api.predicates("idp");
    const serverSide = await api.predicates("idp", qtype);
    const clientSide = allowedForQuestion(all, qtype);
    expect(clientSide.map((p) => p.name)).toEqual(serverSide.map((p) => p.name));
  });
});

describe("steering flow", () => {
  it("create -> ask -> ma -> history -> exit leaves a traceable path", async () => {
    const api = new Api(base, 100);
    await api.createSession("idp", "idp", 0.5, 7);

    const palette = await api.predicates("idp", "when_do_you");
    let builder = emptyBuilder("when_do_you");
    builder = togglePredicate(builder, 0, palette[0].name);
    const first = await api.ask(buildPayload(builder));
    expect(["ready", "no_situation"]).toContain(first.status);

    const afterMa = await api.respond("ma");
    expect(afterMa.epsilon).toBe(1.0);
    const afterLa = await api.respond("la");
    expect(afterLa.epsilon).toBe(0.5);
    const afterIgnoreOrMa = await api.respond("ma");

    const hist = await api.history();
    expect(hist.nodes).toHaveLength(4);
    const path = pathToCurrent(hist.nodes, hist.current);
    expect(path).toHaveLength(4);
    expect(path.map((n) => n.epsilon)).toEqual([0.5, 1.0, 0.5, 1.0]);

    // history travel: jump back to the first state and verify the server agrees
    const back = await api.respond("history", hist.nodes[0].id);
    expect(back.state).toBe(hist.nodes[0].id);
    const exited = await api.respond("exit");
    expect(exited.status).toBe("exited");
  }, 120_000);
});
