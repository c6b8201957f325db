/* @ts-self-types="./fta_web.d.ts" */

/**
 * Activation and derivative of every tile at evenly spaced inputs.
 */
export class ActivationCurve {
    static __wrap(ptr) {
        const obj = Object.create(ActivationCurve.prototype);
        obj.__wbg_ptr = ptr;
        ActivationCurveFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ActivationCurveFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_activationcurve_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get bins() {
        const ret = wasm.activationcurve_bins(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Row-major `points × bins`.
     * @returns {Float64Array}
     */
    get slopes() {
        const ret = wasm.activationcurve_slopes(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Row-major `points × bins`.
     * @returns {Float64Array}
     */
    get values() {
        const ret = wasm.activationcurve_values(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {Float64Array}
     */
    get z() {
        const ret = wasm.activationcurve_z(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
}
if (Symbol.dispose) ActivationCurve.prototype[Symbol.dispose] = ActivationCurve.prototype.free;

/**
 * Nonzero counts of FTA outputs on uniform inputs in `[l, u]`.
 */
export class SparsityStats {
    static __wrap(ptr) {
        const obj = Object.create(SparsityStats.prototype);
        obj.__wbg_ptr = ptr;
        SparsityStatsFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        SparsityStatsFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_sparsitystats_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get bins() {
        const ret = wasm.__wbg_get_sparsitystats_bins(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Guaranteed maximum, `2⌊η/δ⌋ + 3`.
     * @returns {number}
     */
    get bound() {
        const ret = wasm.__wbg_get_sparsitystats_bound(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Largest number of active tiles seen.
     * @returns {number}
     */
    get max_active() {
        const ret = wasm.__wbg_get_sparsitystats_max_active(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Mean fraction of active tiles.
     * @returns {number}
     */
    get mean_active() {
        const ret = wasm.__wbg_get_sparsitystats_mean_active(this.__wbg_ptr);
        return ret;
    }
}
if (Symbol.dispose) SparsityStats.prototype[Symbol.dispose] = SparsityStats.prototype.free;

/**
 * Inputs of a drift stream together with its moving mean.
 */
export class Trajectory {
    static __wrap(ptr) {
        const obj = Object.create(Trajectory.prototype);
        obj.__wbg_ptr = ptr;
        TrajectoryFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        TrajectoryFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_trajectory_free(ptr, 0);
    }
    /**
     * Stationary variance of the inputs, `(B/2)²`.
     * @returns {number}
     */
    get equilibriumVar() {
        const ret = wasm.trajectory_equilibriumVar(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Float64Array}
     */
    get inputs() {
        const ret = wasm.trajectory_inputs(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {Float64Array}
     */
    get means() {
        const ret = wasm.trajectory_means(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * Sample variance of the simulated inputs.
     * @returns {number}
     */
    get sampleVar() {
        const ret = wasm.trajectory_sampleVar(this.__wbg_ptr);
        return ret;
    }
}
if (Symbol.dispose) Trajectory.prototype[Symbol.dispose] = Trajectory.prototype.free;

/**
 * @param {number} lower
 * @param {number} upper
 * @param {number} tile_width
 * @param {number} eta
 * @param {number} points
 * @param {boolean} hard
 * @returns {ActivationCurve}
 */
export function activationCurve(lower, upper, tile_width, eta, points, hard) {
    const ret = wasm.activationCurve(lower, upper, tile_width, eta, points, hard);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return ActivationCurve.__wrap(ret[0]);
}

/**
 * @param {number} difficulty
 * @param {number} bound
 * @param {number} steps
 * @param {number} segment_length
 * @param {number} seed
 * @returns {Trajectory}
 */
export function driftTrajectory(difficulty, bound, steps, segment_length, seed) {
    const ret = wasm.driftTrajectory(difficulty, bound, steps, segment_length, seed);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return Trajectory.__wrap(ret[0]);
}

/**
 * @param {number} lower
 * @param {number} upper
 * @param {number} tile_width
 * @param {number} eta
 * @param {number} samples
 * @param {number} seed
 * @returns {SparsityStats}
 */
export function sparsityStats(lower, upper, tile_width, eta, samples, seed) {
    const ret = wasm.sparsityStats(lower, upper, tile_width, eta, samples, seed);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return SparsityStats.__wrap(ret[0]);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./fta_web_bg.js": import0,
    };
}

const ActivationCurveFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_activationcurve_free(ptr, 1));
const SparsityStatsFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_sparsitystats_free(ptr, 1));
const TrajectoryFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_trajectory_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('fta_web_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
