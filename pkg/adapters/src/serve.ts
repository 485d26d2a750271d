/** CLI entrypoint for the adapter servers. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { createSegApp } from "./segServer.js";
import { createVidLLMApp } from "./vidllmServer.js";

const argv = yargs(hideBin(process.argv))
  .option("mode", {
    choices: ["seg", "vidllm"] as const,
    demandOption: true,
    describe: "which adapter to run",
  })
  .option("model", {
    type: "string",
    demandOption: true,
    describe: "model identifier; fixture:<path> serves canned records",
  })
  .option("device", { type: "string", default: "cpu" })
  .option("threshold", {
    type: "number",
    default: 0.5,
    describe: "mask binarization threshold in (0,1)",
  })
  .option("max-instances", { type: "number" })
  .option("port", { type: "number", default: 8801 })
  .strict()
  .parseSync();

if (argv.mode === "seg") {
  const app = createSegApp({
    model: argv.model,
    device: argv.device,
    threshold: argv.threshold,
    maxInstances: argv["max-instances"],
    port: argv.port,
  });
  app.listen(argv.port, () => {
    console.log(`segmentation adapter on :${argv.port} (${argv.model})`);
  });
} else {
  const app = createVidLLMApp({ model: argv.model, port: argv.port });
  app.listen(argv.port, () => {
    console.log(`vidllm adapter on :${argv.port} (${argv.model})`);
  });
}
