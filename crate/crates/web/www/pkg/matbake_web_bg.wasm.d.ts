/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_fuseoutcome_free: (a: number, b: number) => void;
export const chair_triangles: () => number;
export const fuse_chair: (a: number, b: number, c: number) => [number, number, number];
export const fuseoutcome_fused_miou: (a: number) => number;
export const fuseoutcome_labels_rgba: (a: number) => [number, number];
export const fuseoutcome_size: (a: number) => number;
export const fuseoutcome_voted_miou: (a: number) => number;
export const relit_sphere: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const render_chair: (a: number, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
