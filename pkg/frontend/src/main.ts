// Explorer entry point: wires the file loader and the four panels.

import { BundleError, parseBundle } from "./bundle.js";
import { GradientPanel, ImagePanel, LivePanel, NetworkPanel } from "./panels.js";

function banner(root: HTMLElement): (message: string | null) => void {
    const node = document.createElement("div");
    node.className = "banner";
    node.style.display = "none";
    root.prepend(node);
    return (message) => {
        if (message === null) {
            node.style.display = "none";
        } else {
            node.style.display = "block";
            node.textContent = message;
        }
    };
}

export function start(root: HTMLElement): void {
    const showError = banner(root);

    const loader = document.createElement("div");
    loader.className = "loader";
    const label = document.createElement("label");
    label.textContent = "Load an exported bundle (bundle.json): ";
    const input = document.createElement("input");
    input.type = "file";
    input.accept = ".json,application/json";
    label.appendChild(input);
    loader.appendChild(label);
    root.appendChild(loader);

    const live = new LivePanel(root);
    const image = new ImagePanel(root);
    const gradient = new GradientPanel(root);
    const network = new NetworkPanel(root);

    input.addEventListener("change", async () => {
        const file = input.files?.[0];
        if (!file) return;
        try {
            const bundle = parseBundle(await file.text());
            showError(null);
            live.params = {
                wInput: bundle.unit.w_input,
                wLeak: bundle.unit.w_leak,
                vThresh: bundle.unit.v_thresh,
            };
            live.setSignal(bundle.unit.input.slice());
            image.render(bundle);
            gradient.render(bundle);
            network.render(bundle);
        } catch (err) {
            if (err instanceof BundleError) {
                showError(`could not load bundle: ${err.message}`);
            } else {
                showError(`unexpected error: ${(err as Error).message}`);
            }
        }
    });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
    start(document.getElementById("app") as HTMLElement);
}
