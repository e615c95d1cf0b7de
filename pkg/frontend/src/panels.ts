// The four explorer panels. Each panel owns a DOM subtree and redraws from
// its inputs; loaded bundles are never mutated.

import { ExplorerBundle, GradientSection } from "./bundle.js";
import { LifUnitParams, MAX_STEPS, clamp, localityMask, minInput, simulate } from "./lif.js";
import {
    clear,
    drawColumnMarker,
    drawHorizontal,
    drawMatrix,
    drawSeries,
    drawSpikes,
    grayShade,
    matrixRange,
    spikeShade,
    valueRange,
} from "./plot.js";

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    parent: HTMLElement,
    className?: string,
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    parent.appendChild(node);
    return node;
}

function canvas(parent: HTMLElement, width: number, height: number): CanvasRenderingContext2D {
    const c = el("canvas", parent);
    c.width = width;
    c.height = height;
    const ctx = c.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    return ctx;
}

interface SliderSpec {
    label: string;
    min: number;
    max: number;
    step: number;
    value: number;
    onInput: (value: number) => void;
}

function slider(parent: HTMLElement, spec: SliderSpec): HTMLInputElement {
    const wrap = el("div", parent, "slider-row");
    const label = el("label", wrap, undefined, `${spec.label}: `);
    const readout = el("span", label, "readout", spec.value.toString());
    const input = el("input", wrap);
    input.type = "range";
    input.min = spec.min.toString();
    input.max = spec.max.toString();
    input.step = spec.step.toString();
    input.value = spec.value.toString();
    input.addEventListener("input", () => {
        const value = clamp(parseFloat(input.value), spec.min, spec.max);
        readout.textContent = value.toString();
        spec.onInput(value);
    });
    return input;
}

export const PRESET_SIGNALS: Record<string, (steps: number) => number[]> = {
    "reference pulse": (steps) => {
        const base = [
            ...Array(5).fill(0),
            ...Array(15).fill(0.8),
            ...Array(8).fill(0),
            ...Array(10).fill(1.6),
            ...Array(12).fill(0.15),
            ...Array(10).fill(0.5),
        ];
        return base.slice(0, steps);
    },
    "constant 1.0": (steps) => Array(steps).fill(1.0),
    "constant 0.15": (steps) => Array(steps).fill(0.15),
    "sine": (steps) => Array.from({ length: steps }, (_, t) => 0.75 + 0.75 * Math.sin((2 * Math.PI * 3 * t) / steps)),
};

// Live what-if panel: sliders steer the unit parameters and every change
// re-simulates immediately.
export class LivePanel {
    params: LifUnitParams = { wInput: 0.5, wLeak: 0.1, vThresh: 1.0 };
    signal: number[];
    private readonly trace: CanvasRenderingContext2D;
    private readonly info: HTMLElement;
    private drawing = false;

    constructor(root: HTMLElement) {
        const section = el("section", root, "panel");
        el("h2", section, undefined, "Live unit");
        el("p", section, "hint",
            "Drag the sliders to steer the unit; drag on the plot to paint the input signal.");
        this.signal = PRESET_SIGNALS["reference pulse"](60);

        const presets = el("select", section);
        for (const name of Object.keys(PRESET_SIGNALS)) {
            const option = el("option", presets, undefined, name);
            option.value = name;
        }
        presets.addEventListener("change", () => {
            this.signal = PRESET_SIGNALS[presets.value](this.signal.length);
            this.redraw();
        });

        slider(section, {
            label: "w_input", min: 0, max: 2, step: 0.01, value: this.params.wInput,
            onInput: (v) => { this.params.wInput = v; this.redraw(); },
        });
        slider(section, {
            label: "w_leak", min: 0, max: 0.99, step: 0.01, value: this.params.wLeak,
            onInput: (v) => { this.params.wLeak = v; this.redraw(); },
        });
        slider(section, {
            label: "v_thresh", min: 0.1, max: 3, step: 0.05, value: this.params.vThresh,
            onInput: (v) => { this.params.vThresh = v; this.redraw(); },
        });

        this.trace = canvas(section, 640, 220);
        this.attachDrawing(this.trace.canvas);
        this.info = el("p", section, "info");
        this.redraw();
    }

    private attachDrawing(target: HTMLCanvasElement): void {
        const paint = (event: PointerEvent) => {
            const rect = target.getBoundingClientRect();
            const t = Math.round(((event.clientX - rect.left) / rect.width) * (this.signal.length - 1));
            const level = (1 - (event.clientY - rect.top) / rect.height) * 2.5;
            if (t >= 0 && t < this.signal.length) {
                this.signal[Math.min(this.signal.length - 1, Math.max(0, t))] = clamp(level, 0, 2.5);
                this.redraw();
            }
        };
        target.addEventListener("pointerdown", (event) => {
            this.drawing = true;
            paint(event);
        });
        target.addEventListener("pointermove", (event) => {
            if (this.drawing) paint(event);
        });
        window.addEventListener("pointerup", () => { this.drawing = false; });
    }

    setSignal(signal: number[]): void {
        this.signal = signal.slice(0, MAX_STEPS);
        this.redraw();
    }

    redraw(): void {
        const result = simulate(this.params, this.signal);
        clear(this.trace);
        const range = valueRange([...this.signal, ...result.potentials, this.params.vThresh]);
        drawSpikes(this.trace, result.spikeIndices, this.signal.length, "#f94144");
        drawHorizontal(this.trace, this.params.vThresh, range, "#808080");
        drawSeries(this.trace, this.signal, range, "#9d4edd");
        drawSeries(this.trace, result.potentials, range, "#f3722c", 2);
        const floor = minInput(this.params);
        this.info.textContent =
            `spikes: ${result.spikeIndices.length}  `
            + `minimum constant input: ${floor.toFixed(3)}  `
            + `(input purple, potential orange, spikes red)`;
    }
}

// Image panel: pixels, membrane potential and spike raster with a time
// scrubber stepping through the columns.
export class ImagePanel {
    private readonly section: HTMLElement;

    constructor(root: HTMLElement) {
        this.section = el("section", root, "panel");
        el("h2", this.section, undefined, "Image response");
        el("p", this.section, "hint", "Load a bundle to see a network input and its spike code.");
    }

    render(bundle: ExplorerBundle): void {
        this.section.replaceChildren();
        el("h2", this.section, undefined, "Image response");
        const image = bundle.image;
        const gray = image.pixels.map((row) => row.map((px) => {
            const channels = px as unknown as number[];
            return channels.reduce((a, b) => a + b, 0) / channels.length;
        }));

        const label = el("p", this.section, "info");
        label.textContent = `image ${image.rows}x${image.cols}x${image.channels}`
            + (image.label === null ? "" : `, class ${image.label}`)
            + `, spike density ${image.density.toFixed(4)}`;

        const pixelCtx = canvas(this.section, 480, 160);
        drawMatrix(pixelCtx, gray, grayShade({ min: 0, max: 1 }));
        const potentialCtx = canvas(this.section, 480, 160);
        drawMatrix(potentialCtx, image.potential, grayShade(matrixRange(image.potential)));
        const rasterCtx = canvas(this.section, 480, 160);
        drawMatrix(rasterCtx, image.spikes, spikeShade);

        const cols = image.cols;
        const marker = el("p", this.section, "info", "column 0 of " + (cols - 1));
        slider(this.section, {
            label: "timestep", min: 0, max: cols - 1, step: 1, value: 0,
            onInput: (value) => {
                const t = Math.round(value);
                marker.textContent = `column ${t} of ${cols - 1}`;
                drawMatrix(pixelCtx, gray, grayShade({ min: 0, max: 1 }));
                drawColumnMarker(pixelCtx, t, cols, "#f94144");
                drawMatrix(potentialCtx, image.potential, grayShade(matrixRange(image.potential)));
                drawColumnMarker(potentialCtx, t, cols, "#f94144");
                drawMatrix(rasterCtx, image.spikes, spikeShade);
                drawColumnMarker(rasterCtx, t, cols, "#f94144");
            },
        });
    }
}

// Gradient panel: pick the error-injection timestep; the bar row shows
// which past inputs receive gradient (zero at and before the last reset).
export class GradientPanel {
    private readonly section: HTMLElement;

    constructor(root: HTMLElement) {
        this.section = el("section", root, "panel");
        el("h2", this.section, undefined, "Gradient flow");
        el("p", this.section, "hint", "Load a bundle to inspect how errors reach past inputs.");
    }

    static rowPattern(table: GradientSection, t: number): boolean[] {
        return table.rows[t].map((v) => v !== 0);
    }

    render(bundle: ExplorerBundle): void {
        this.section.replaceChildren();
        el("h2", this.section, undefined, "Gradient flow");
        const table = bundle.gradient_table;
        const steps = table.input.length;

        const traceCtx = canvas(this.section, 640, 140);
        const rowCtx = canvas(this.section, 640, 70);
        const info = el("p", this.section, "info");

        const draw = (t: number) => {
            clear(traceCtx);
            const range = valueRange([...table.input, ...table.potential, table.v_thresh]);
            drawSpikes(traceCtx, table.spike_indices, steps, "#f94144");
            drawHorizontal(traceCtx, table.v_thresh, range, "#808080");
            drawSeries(traceCtx, table.input, range, "#9d4edd");
            drawSeries(traceCtx, table.potential, range, "#f3722c", 2);
            drawColumnMarker(traceCtx, t, steps, "#2d6a4f");

            clear(rowCtx);
            const row = table.rows[t];
            const peak = Math.max(...row.map(Math.abs), 1e-12);
            const cw = rowCtx.canvas.width / steps;
            for (let s = 0; s < steps; s++) {
                const h = (Math.abs(row[s]) / peak) * (rowCtx.canvas.height - 8);
                rowCtx.fillStyle = row[s] === 0 ? "#d8d8d8" : "#2d6a4f";
                rowCtx.fillRect(s * cw + 1, rowCtx.canvas.height - h - 4, cw - 2, h + 2);
            }
            const reached = GradientPanel.rowPattern(table, t).filter(Boolean).length;
            info.textContent = `error injected at t = ${t}: gradient reaches ${reached} past input(s)`;
        };

        slider(this.section, {
            label: "injection timestep", min: 0, max: steps - 1, step: 1,
            value: steps - 1, onInput: (v) => draw(Math.round(v)),
        });
        draw(steps - 1);
    }
}

// Network panel: recurrent activations, per-class probabilities over time,
// and the rasters before and after training.
export class NetworkPanel {
    private readonly section: HTMLElement;

    constructor(root: HTMLElement) {
        this.section = el("section", root, "panel");
        el("h2", this.section, undefined, "Network");
        el("p", this.section, "hint", "Load a bundle to see the readout and the before/after spike codes.");
    }

    render(bundle: ExplorerBundle): void {
        this.section.replaceChildren();
        el("h2", this.section, undefined, "Network");
        const net = bundle.network_panel;

        el("p", this.section, "info",
            `prediction: ${net.class_names[net.predicted]}`
            + (net.label === null ? "" : ` (true class ${net.label})`));

        el("p", this.section, "info", "recurrent activations (units x time)");
        const hiddenCtx = canvas(this.section, 480, 120);
        drawMatrix(hiddenCtx, net.hidden, grayShade(matrixRange(net.hidden)));

        el("p", this.section, "info", "class probabilities over time");
        const probsCtx = canvas(this.section, 480, 140);
        clear(probsCtx);
        const range = { min: 0, max: 1 };
        net.probs.forEach((series, k) => {
            const hue = (k * 360) / net.probs.length;
            drawSeries(probsCtx, series, range, `hsl(${hue} 70% 45%)`, k === net.predicted ? 2.5 : 1);
        });

        const rasters = bundle.rasters;
        el("p", this.section, "info",
            `spike density before ${rasters.before.density.toFixed(4)} vs after ${rasters.after.density.toFixed(4)}`);
        const beforeCtx = canvas(this.section, 480, 120);
        drawMatrix(beforeCtx, rasters.before.spikes, spikeShade);
        const afterCtx = canvas(this.section, 480, 120);
        drawMatrix(afterCtx, rasters.after.spikes, spikeShade);
    }
}

// Parity helper used by both the live panel preset and the tests: simulate
// with the bundle's unit parameters over the bundle's input signal.
export function simulateBundleUnit(bundle: ExplorerBundle) {
    const unit = bundle.unit;
    return simulate(
        { wInput: unit.w_input, wLeak: unit.w_leak, vThresh: unit.v_thresh },
        unit.input,
    );
}
