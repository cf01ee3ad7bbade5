import { parseLine } from "./messages.js";
import { render } from "./app.js";
import { foldMessage, initialState, sendOperatorCommand } from "./state.js";
import { SseTransport } from "./transport.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const transport = new SseTransport("");
let state = initialState();
let status = "starting";
const operatorId = `op-${Math.random().toString(36).slice(2, 8)}`;

function repaint(): void {
  render(root as HTMLElement, state, status, {
    onOpenValve: (valveId) => {
      const sent = sendOperatorCommand(state, valveId, "open", operatorId, (line) => {
        void transport.sendCommand(line).then((reply) => {
          const parsed = parseLine(reply);
          // rejections surface in the alarm feed; state changes only arrive
          // via echoed valve events on the stream
          if (parsed.kind === "error") {
            state = foldMessage(state, parsed);
            repaint();
          }
        });
      });
      if (!sent) {
        state = foldMessage(state, { kind: "error", error: `open ${valveId} not permitted` });
        repaint();
      }
    },
  });
}

let pending = false;
transport.connect(
  (line) => {
    state = foldMessage(state, parseLine(line));
    if (!pending) {
      pending = true;
      requestAnimationFrame(() => {
        pending = false;
        repaint();
      });
    }
  },
  (s) => {
    status = s;
    repaint();
  },
);
repaint();
