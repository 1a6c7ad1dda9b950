export * from "./types.js";
export * from "./api.js";
export * from "./view.js";
export * from "./charts.js";
export * from "./render.js";
export * from "./store.js";
