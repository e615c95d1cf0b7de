// Minimal canvas plotting helpers shared by the panels.

export interface Range {
    min: number;
    max: number;
}

export function valueRange(values: number[], pad = 0.1): Range {
    let min = Infinity;
    let max = -Infinity;
    for (const v of values) {
        if (v < min) min = v;
        if (v > max) max = v;
    }
    if (!isFinite(min) || !isFinite(max)) {
        return { min: 0, max: 1 };
    }
    if (min === max) {
        return { min: min - 1, max: max + 1 };
    }
    const margin = (max - min) * pad;
    return { min: min - margin, max: max + margin };
}

export function clear(ctx: CanvasRenderingContext2D): void {
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

export function drawSeries(
    ctx: CanvasRenderingContext2D,
    values: number[],
    range: Range,
    color: string,
    width = 1.5,
): void {
    const { canvas } = ctx;
    const n = values.length;
    if (n === 0) return;
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.beginPath();
    for (let i = 0; i < n; i++) {
        const x = (i / Math.max(1, n - 1)) * (canvas.width - 10) + 5;
        const y = canvas.height - 5 - ((values[i] - range.min) / (range.max - range.min)) * (canvas.height - 10);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
    }
    ctx.stroke();
}

export function drawHorizontal(
    ctx: CanvasRenderingContext2D,
    value: number,
    range: Range,
    color: string,
): void {
    const y = ctx.canvas.height - 5 - ((value - range.min) / (range.max - range.min)) * (ctx.canvas.height - 10);
    ctx.strokeStyle = color;
    ctx.lineWidth = 1;
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(5, y);
    ctx.lineTo(ctx.canvas.width - 5, y);
    ctx.stroke();
    ctx.setLineDash([]);
}

export function drawSpikes(
    ctx: CanvasRenderingContext2D,
    indices: number[],
    total: number,
    color: string,
): void {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    for (const t of indices) {
        const x = (t / Math.max(1, total - 1)) * (ctx.canvas.width - 10) + 5;
        ctx.beginPath();
        ctx.moveTo(x, 5);
        ctx.lineTo(x, ctx.canvas.height - 5);
        ctx.stroke();
    }
}

export function drawColumnMarker(
    ctx: CanvasRenderingContext2D,
    index: number,
    total: number,
    color: string,
): void {
    const cellWidth = ctx.canvas.width / total;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.strokeRect(index * cellWidth, 0, cellWidth, ctx.canvas.height);
}

// matrix[row][col] rendered as a heatmap; values mapped through `shade`
// returning a CSS color.
export function drawMatrix(
    ctx: CanvasRenderingContext2D,
    matrix: number[][],
    shade: (v: number) => string,
): void {
    const rows = matrix.length;
    if (rows === 0) return;
    const cols = matrix[0].length;
    const cw = ctx.canvas.width / cols;
    const ch = ctx.canvas.height / rows;
    for (let r = 0; r < rows; r++) {
        for (let c = 0; c < cols; c++) {
            ctx.fillStyle = shade(matrix[r][c]);
            ctx.fillRect(c * cw, r * ch, Math.ceil(cw), Math.ceil(ch));
        }
    }
}

export function grayShade(range: Range): (v: number) => string {
    return (v) => {
        const unit = (v - range.min) / (range.max - range.min || 1);
        const level = Math.round(255 * (1 - Math.min(1, Math.max(0, unit))));
        return `rgb(${level},${level},${level})`;
    };
}

export function spikeShade(v: number): string {
    return v > 0.5 ? "#ffd60a" : "#30306a";
}

export function matrixRange(matrix: number[][]): Range {
    let min = Infinity;
    let max = -Infinity;
    for (const row of matrix) {
        for (const v of row) {
            if (v < min) min = v;
            if (v > max) max = v;
        }
    }
    if (!isFinite(min)) return { min: 0, max: 1 };
    if (min === max) return { min: min - 1, max: max + 1 };
    return { min, max };
}
