#pragma once

namespace ctxmri {

/// Worker cap for coarse-grained parallel sections (sweep cells, dataset
/// generation). Honors the CONTEXTRECON_THREADS environment variable when
/// set, otherwise the OpenMP default.
int harness_thread_cap();

/// True when OpenMP kernels are enabled at runtime (CONTEXTRECON_SERIAL
/// unset). Used by the dual-path kernels; tests force both paths explicitly.
bool use_parallel_kernels();

}  // namespace ctxmri
