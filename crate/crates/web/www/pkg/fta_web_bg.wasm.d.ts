/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_activationcurve_free: (a: number, b: number) => void;
export const __wbg_get_sparsitystats_bins: (a: number) => number;
export const __wbg_get_sparsitystats_bound: (a: number) => number;
export const __wbg_get_sparsitystats_max_active: (a: number) => number;
export const __wbg_get_sparsitystats_mean_active: (a: number) => number;
export const __wbg_sparsitystats_free: (a: number, b: number) => void;
export const __wbg_trajectory_free: (a: number, b: number) => void;
export const activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const activationcurve_bins: (a: number) => number;
export const activationcurve_slopes: (a: number) => [number, number];
export const activationcurve_values: (a: number) => [number, number];
export const activationcurve_z: (a: number) => [number, number];
export const driftTrajectory: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const sparsityStats: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const trajectory_equilibriumVar: (a: number) => number;
export const trajectory_inputs: (a: number) => [number, number];
export const trajectory_means: (a: number) => [number, number];
export const trajectory_sampleVar: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
