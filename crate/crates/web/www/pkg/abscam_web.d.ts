/* tslint:disable */
/* eslint-disable */

export class Curves {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    deletion(): Float64Array;
    deletion_auc(): number;
    insertion(): Float64Array;
    insertion_auc(): number;
}

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    class_count(): number;
    curves(rgba: Uint8Array, method: string, _class: number, steps: number): Curves;
    /**
     * `class < 0` explains the predicted class.
     */
    explain(rgba: Uint8Array, method: string, _class: number): Explanation;
    /**
     * One of the built-in synthetic test images.
     */
    static fixture(index: number): Uint8Array;
    static methods(): string[];
    constructor(seed: bigint);
    static size(): number;
    /**
     * Keeps the top `fraction` of salient pixels and dims the rest.
     */
    topk(rgba: Uint8Array, method: string, _class: number, fraction: number): Uint8Array;
}

export class Explanation {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    class(): number;
    heatmap(): Uint8Array;
    overlay(): Uint8Array;
    probability(): number;
    /**
     * Normalized saliency values in row-major order.
     */
    values(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curves_free: (a: number, b: number) => void;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_explanation_free: (a: number, b: number) => void;
    readonly curves_deletion: (a: number) => [number, number];
    readonly curves_deletion_auc: (a: number) => number;
    readonly curves_insertion: (a: number) => [number, number];
    readonly curves_insertion_auc: (a: number) => number;
    readonly demo_class_count: (a: number) => number;
    readonly demo_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly demo_explain: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_fixture: (a: number) => [number, number];
    readonly demo_methods: () => [number, number];
    readonly demo_new: (a: bigint) => number;
    readonly demo_size: () => number;
    readonly demo_topk: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly explanation_class: (a: number) => number;
    readonly explanation_heatmap: (a: number) => [number, number];
    readonly explanation_overlay: (a: number) => [number, number];
    readonly explanation_probability: (a: number) => number;
    readonly explanation_values: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
