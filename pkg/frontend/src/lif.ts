// Scalar leaky integrate-and-fire simulation, mirroring the core engine
// exactly: strict inequalities on both step functions and reset-to-zero.
//
//   V_t = wInput * x_t + (1 - wLeak) * V_{t-1} * [V_{t-1} < vThresh]
//   spike_t = V_t > vThresh
//
// The arithmetic order matches the reference implementation so traces agree
// to the last bit for identical float64 inputs.

export interface LifUnitParams {
    wInput: number;
    wLeak: number;
    vThresh: number;
}

export interface SimulationResult {
    potentials: number[];
    spikeIndices: number[];
}

export const MAX_STEPS = 2000;

export function simulate(params: LifUnitParams, input: number[]): SimulationResult {
    const steps = Math.min(input.length, MAX_STEPS);
    const potentials: number[] = new Array(steps);
    const spikeIndices: number[] = [];
    let v = 0;
    for (let t = 0; t < steps; t++) {
        const carry = v < params.vThresh ? v : 0;
        v = params.wInput * input[t] + (1 - params.wLeak) * carry;
        potentials[t] = v;
        if (v > params.vThresh) {
            spikeIndices.push(t);
        }
    }
    return { potentials, spikeIndices };
}

// Smallest constant input that can ever drive the unit to threshold.
export function minInput(params: LifUnitParams): number {
    if (params.wInput <= 0) {
        return Infinity;
    }
    return (params.vThresh * params.wLeak) / params.wInput;
}

// Closed-form step count from the charged state V = wInput * i, using the
// reach-or-exceed criterion of the geometric-series derivation; null when
// the input can never reach threshold.
export function stepsToSpike(params: LifUnitParams, input: number): number | null {
    if (input <= 0 || input <= minInput(params)) {
        return null;
    }
    if (params.wLeak === 0) {
        return Math.ceil(params.vThresh / (params.wInput * input) - 1e-9);
    }
    const ratio =
        Math.log(1 - (params.vThresh / input) * (params.wLeak / params.wInput)) /
        Math.log(1 - params.wLeak);
    return Math.max(0, Math.ceil(ratio - 1 - 1e-9));
}

// Which past inputs receive gradient from an error injected at timestep t:
// true for every s in (lastReset, t], false at or before the most recent
// potential that reached threshold (the reset blocks the path), false after t.
export function localityMask(potentials: number[], vThresh: number, t: number): boolean[] {
    const mask = new Array(potentials.length).fill(false);
    if (t < 0 || t >= potentials.length) {
        return mask;
    }
    let start = 0;
    for (let j = t - 1; j >= 0; j--) {
        if (potentials[j] >= vThresh) {
            start = j + 1;
            break;
        }
    }
    for (let s = start; s <= t; s++) {
        mask[s] = true;
    }
    return mask;
}

export function clamp(value: number, lo: number, hi: number): number {
    return Math.min(hi, Math.max(lo, value));
}
