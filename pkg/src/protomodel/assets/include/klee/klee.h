/* Minimal declarations of the symbolic-engine intrinsics referenced by
 * emitted programs, so they can be compiled (or syntax-checked) on hosts
 * without the engine's own headers installed. */
#ifndef PROTOMODEL_KLEE_SHIM_H
#define PROTOMODEL_KLEE_SHIM_H

#include <stddef.h>
#include <stdint.h>

void klee_make_symbolic(void* addr, size_t nbytes, const char* name);
void klee_assume(uintptr_t condition);

#endif
