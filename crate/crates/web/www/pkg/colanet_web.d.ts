/* tslint:disable */
/* eslint-disable */

export class Demo {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    accuracy(): number;
    advance(n: number): number;
    classify(pixels: Uint8Array): Uint32Array;
    /**
     * Session on uploaded IDX files.
     */
    static fromIdx(images: Uint8Array, labels: Uint8Array, train: number, test: number, seed: bigint): Demo;
    gridHeight(): number;
    gridWidth(): number;
    /**
     * Session on procedurally drawn digits.
     */
    static synthetic(train: number, test: number, seed: bigint): Demo;
    tested(): number;
    trained(): number;
    /**
     * RGBA pixels of the weight grid, `gridWidth` x `gridHeight`.
     */
    weightsRgba(): Uint8Array;
}

export function inspectConfig(xml: string): string;

export function referenceConfig(): string;

export function spikeRaster(pixels: Uint8Array): Uint32Array;

export function syntheticDigit(label: number, seed: bigint): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_accuracy: (a: number) => number;
    readonly demo_advance: (a: number, b: number) => [number, number, number];
    readonly demo_classify: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_fromIdx: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly demo_gridHeight: (a: number) => number;
    readonly demo_gridWidth: (a: number) => number;
    readonly demo_synthetic: (a: number, b: number, c: bigint) => [number, number, number];
    readonly demo_tested: (a: number) => number;
    readonly demo_trained: (a: number) => number;
    readonly demo_weightsRgba: (a: number) => [number, number, number, number];
    readonly inspectConfig: (a: number, b: number) => [number, number];
    readonly referenceConfig: () => [number, number];
    readonly spikeRaster: (a: number, b: number) => [number, number, number, number];
    readonly syntheticDigit: (a: number, b: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
