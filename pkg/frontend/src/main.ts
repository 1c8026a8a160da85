// Entry point: wire the three panels to the service behind this page.

import { Client } from "./api.js";
import { BuildPanel } from "./build_panel.js";
import { MonitorPanel } from "./monitor_panel.js";
import { TranslatePanel } from "./translate_panel.js";

function mount(): void {
  const client = new Client();
  const panels = {
    build: document.getElementById("panel-build")!,
    monitor: document.getElementById("panel-monitor")!,
    translate: document.getElementById("panel-translate")!,
  };

  const show = (name: keyof typeof panels) => {
    for (const [key, panel] of Object.entries(panels)) {
      panel.classList.toggle("active", key === name);
    }
    document.querySelectorAll<HTMLButtonElement>("nav [data-tab]").forEach((btn) => {
      btn.classList.toggle("active", btn.dataset.tab === name);
    });
  };
  document.querySelectorAll<HTMLButtonElement>("nav [data-tab]").forEach((btn) => {
    btn.addEventListener("click", () => show(btn.dataset.tab as keyof typeof panels));
  });

  const translate = new TranslatePanel(panels.translate, client);
  const monitor = new MonitorPanel(panels.monitor, client, (modelId) => {
    void translate.preselect(modelId);
    show("translate");
  });
  new BuildPanel(panels.build, client, (jobId) => {
    monitor.watch(jobId);
    show("monitor");
  });
  show("build");

  const health = document.getElementById("health")!;
  const refreshHealth = async () => {
    try {
      const h = await client.health();
      health.textContent = `v${h.version} · ${h.models} model${h.models === 1 ? "" : "s"}`;
      health.classList.remove("down");
    } catch {
      health.textContent = "service unreachable";
      health.classList.add("down");
    }
  };
  void refreshHealth();
  setInterval(() => void refreshHealth(), 15000);
}

mount();
