/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curves_free: (a: number, b: number) => void;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_explanation_free: (a: number, b: number) => void;
export const curves_deletion: (a: number) => [number, number];
export const curves_deletion_auc: (a: number) => number;
export const curves_insertion: (a: number) => [number, number];
export const curves_insertion_auc: (a: number) => number;
export const demo_class_count: (a: number) => number;
export const demo_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const demo_explain: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const demo_fixture: (a: number) => [number, number];
export const demo_methods: () => [number, number];
export const demo_new: (a: bigint) => number;
export const demo_size: () => number;
export const demo_topk: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const explanation_class: (a: number) => number;
export const explanation_heatmap: (a: number) => [number, number];
export const explanation_overlay: (a: number) => [number, number];
export const explanation_probability: (a: number) => number;
export const explanation_values: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
