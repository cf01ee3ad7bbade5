/** Stream connection and command channel over the service's HTTP tap. */

export interface Transport {
  /** begin streaming; onLine fires once per NDJSON line */
  connect(onLine: (line: string) => void, onStatus: (status: string) => void): void;
  /** POST one command line; resolves to the reply line */
  sendCommand(line: string): Promise<string>;
}

export class SseTransport implements Transport {
  private source: EventSource | null = null;
  private retryMs = 1000;

  constructor(private baseUrl: string = "") {}

  connect(onLine: (line: string) => void, onStatus: (status: string) => void): void {
    const open = () => {
      onStatus("connecting");
      const source = new EventSource(`${this.baseUrl}/stream`);
      this.source = source;
      source.onopen = () => {
        this.retryMs = 1000;
        onStatus("live");
      };
      source.onmessage = (ev) => onLine(ev.data);
      source.onerror = () => {
        source.close();
        onStatus(`disconnected, retrying in ${Math.round(this.retryMs / 1000)}s`);
        setTimeout(open, this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 15000);
      };
    };
    open();
  }

  async sendCommand(line: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/command`, { method: "POST", body: line });
    return await resp.text();
  }
}
