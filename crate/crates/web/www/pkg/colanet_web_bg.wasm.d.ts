/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_accuracy: (a: number) => number;
export const demo_advance: (a: number, b: number) => [number, number, number];
export const demo_classify: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_fromIdx: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const demo_gridHeight: (a: number) => number;
export const demo_gridWidth: (a: number) => number;
export const demo_synthetic: (a: number, b: number, c: bigint) => [number, number, number];
export const demo_tested: (a: number) => number;
export const demo_trained: (a: number) => number;
export const demo_weightsRgba: (a: number) => [number, number, number, number];
export const inspectConfig: (a: number, b: number) => [number, number];
export const referenceConfig: () => [number, number];
export const spikeRaster: (a: number, b: number) => [number, number, number, number];
export const syntheticDigit: (a: number, b: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
