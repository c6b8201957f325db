/* tslint:disable */
/* eslint-disable */

/**
 * Activation and derivative of every tile at evenly spaced inputs.
 */
export class ActivationCurve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bins: number;
    /**
     * Row-major `points × bins`.
     */
    readonly slopes: Float64Array;
    /**
     * Row-major `points × bins`.
     */
    readonly values: Float64Array;
    readonly z: Float64Array;
}

/**
 * Nonzero counts of FTA outputs on uniform inputs in `[l, u]`.
 */
export class SparsityStats {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bins: number;
    /**
     * Guaranteed maximum, `2⌊η/δ⌋ + 3`.
     */
    readonly bound: number;
    /**
     * Largest number of active tiles seen.
     */
    readonly max_active: number;
    /**
     * Mean fraction of active tiles.
     */
    readonly mean_active: number;
}

/**
 * Inputs of a drift stream together with its moving mean.
 */
export class Trajectory {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Stationary variance of the inputs, `(B/2)²`.
     */
    readonly equilibriumVar: number;
    readonly inputs: Float64Array;
    readonly means: Float64Array;
    /**
     * Sample variance of the simulated inputs.
     */
    readonly sampleVar: number;
}

export function activationCurve(lower: number, upper: number, tile_width: number, eta: number, points: number, hard: boolean): ActivationCurve;

export function driftTrajectory(difficulty: number, bound: number, steps: number, segment_length: number, seed: number): Trajectory;

export function sparsityStats(lower: number, upper: number, tile_width: number, eta: number, samples: number, seed: number): SparsityStats;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_activationcurve_free: (a: number, b: number) => void;
    readonly __wbg_get_sparsitystats_bins: (a: number) => number;
    readonly __wbg_get_sparsitystats_bound: (a: number) => number;
    readonly __wbg_get_sparsitystats_max_active: (a: number) => number;
    readonly __wbg_get_sparsitystats_mean_active: (a: number) => number;
    readonly __wbg_sparsitystats_free: (a: number, b: number) => void;
    readonly __wbg_trajectory_free: (a: number, b: number) => void;
    readonly activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly activationcurve_bins: (a: number) => number;
    readonly activationcurve_slopes: (a: number) => [number, number];
    readonly activationcurve_values: (a: number) => [number, number];
    readonly activationcurve_z: (a: number) => [number, number];
    readonly driftTrajectory: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly sparsityStats: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly trajectory_equilibriumVar: (a: number) => number;
    readonly trajectory_inputs: (a: number) => [number, number];
    readonly trajectory_means: (a: number) => [number, number];
    readonly trajectory_sampleVar: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
