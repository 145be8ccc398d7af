import { createBridgeServer, makeTracker } from "./server";

function parseArgs(argv: string[]): { port: number; tracker: string; radius: number } {
  let port = 7301;
  let tracker = "ncc";
  let radius = 32;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--port") port = Number(argv[++i]);
    else if (argv[i] === "--tracker") tracker = argv[++i];
    else if (argv[i] === "--radius") radius = Number(argv[++i]);
    else {
      console.error(`unknown argument ${argv[i]}`);
      process.exit(2);
    }
  }
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    console.error("--port must be an integer in [0, 65535]");
    process.exit(2);
  }
  return { port, tracker, radius };
}

function main(): void {
  const { port, tracker, radius } = parseArgs(process.argv.slice(2));
  const backend = makeTracker(tracker, radius);
  const server = createBridgeServer(backend, () => process.exit(0));
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address();
    const bound = typeof addr === "object" && addr ? addr.port : port;
    // machine-readable line so callers can discover an ephemeral port
    console.log(`LISTENING ${bound} ${backend.name}`);
  });
}

main();
