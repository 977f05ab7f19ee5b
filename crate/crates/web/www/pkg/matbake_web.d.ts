/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of [`fuse_chair`].
 */
export class FuseOutcome {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * mIoU after region unification.
     */
    readonly fused_miou: number;
    /**
     * Fused label UV map colored by class, `size × size` RGBA.
     */
    readonly labels_rgba: Uint8Array;
    readonly size: number;
    /**
     * mIoU of the raw vote against the painted ground truth.
     */
    readonly voted_miou: number;
}

/**
 * Number of triangles in the demo chair.
 */
export function chair_triangles(): number;

/**
 * Bake the chair through all 41 views with a corrupted segmenter and fuse
 * with vote weight `alpha` on the manual views.
 */
export function fuse_chair(alpha: number, noise: number, seed: number): FuseOutcome;

/**
 * Sphere shaded with uniform metallic/roughness under a directional light
 * arriving from the given elevation and azimuth (degrees).
 */
export function relit_sphere(metallic: number, roughness: number, light_elevation: number, light_azimuth: number, size: number): Uint8Array;

/**
 * Unlit albedo render of the chair; transparent background.
 */
export function render_chair(elevation: number, azimuth: number, size: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_fuseoutcome_free: (a: number, b: number) => void;
    readonly chair_triangles: () => number;
    readonly fuse_chair: (a: number, b: number, c: number) => [number, number, number];
    readonly fuseoutcome_fused_miou: (a: number) => number;
    readonly fuseoutcome_labels_rgba: (a: number) => [number, number];
    readonly fuseoutcome_size: (a: number) => number;
    readonly fuseoutcome_voted_miou: (a: number) => number;
    readonly relit_sphere: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly render_chair: (a: number, b: number, c: number) => [number, number];
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
