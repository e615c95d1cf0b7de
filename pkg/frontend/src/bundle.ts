// Types and validation for the exporter's JSON bundle (format
// "spikegrad-viz", version 1). Loaded bundles are treated as read-only.

export const BUNDLE_FORMAT = "spikegrad-viz";
export const BUNDLE_VERSION = 1;

export interface UnitSection {
    w_input: number;
    w_leak: number;
    v_thresh: number;
    input: number[];
    potential: number[];
    spike_indices: number[];
}

export interface GradientSection extends UnitSection {
    rows: number[][];
}

export interface RasterSection {
    spikes: number[][];
    potential: number[][];
    density: number;
}

export interface ImageSection extends RasterSection {
    rows: number;
    cols: number;
    channels: number;
    label: number | null;
    pixels: number[][][];
    lif_w_input: number[];
    lif_w_leak: number[];
}

export interface NetworkSection {
    class_names: string[];
    hidden: number[][];
    probs: number[][];
    predicted: number;
    label: number | null;
}

export interface ExplorerBundle {
    format: string;
    version: number;
    kind: string;
    config_hash: string;
    seed: number;
    network: number;
    unit: UnitSection;
    gradient_table: GradientSection;
    image: ImageSection;
    network_panel: NetworkSection;
    rasters: { before: RasterSection; after: RasterSection };
}

export class BundleError extends Error {}

function expectArray(value: unknown, name: string): void {
    if (!Array.isArray(value)) {
        throw new BundleError(`bundle field '${name}' is missing or not an array`);
    }
}

export function parseBundle(text: string): ExplorerBundle {
    let raw: unknown;
    try {
        raw = JSON.parse(text);
    } catch (err) {
        throw new BundleError(`not valid JSON: ${(err as Error).message}`);
    }
    if (typeof raw !== "object" || raw === null) {
        throw new BundleError("bundle must be a JSON object");
    }
    const bundle = raw as Record<string, unknown>;
    if (bundle.format !== BUNDLE_FORMAT) {
        throw new BundleError(`unrecognized format ${JSON.stringify(bundle.format)}; expected ${BUNDLE_FORMAT}`);
    }
    if (bundle.version !== BUNDLE_VERSION) {
        throw new BundleError(`bundle version ${JSON.stringify(bundle.version)} is not supported (expected ${BUNDLE_VERSION})`);
    }
    for (const section of ["unit", "gradient_table", "image", "network_panel", "rasters"]) {
        if (typeof bundle[section] !== "object" || bundle[section] === null) {
            throw new BundleError(`bundle is missing its '${section}' section`);
        }
    }
    const unit = bundle.unit as Record<string, unknown>;
    expectArray(unit.input, "unit.input");
    expectArray(unit.potential, "unit.potential");
    expectArray(unit.spike_indices, "unit.spike_indices");
    if ((unit.input as unknown[]).length !== (unit.potential as unknown[]).length) {
        throw new BundleError("unit input and potential lengths differ");
    }
    const table = bundle.gradient_table as Record<string, unknown>;
    expectArray(table.rows, "gradient_table.rows");
    const image = bundle.image as Record<string, unknown>;
    expectArray(image.spikes, "image.spikes");
    expectArray(image.pixels, "image.pixels");
    return bundle as unknown as ExplorerBundle;
}
