/* Header-only stand-in for the handful of PETSc/MPI entry points the test
 * programs use. Single process only; the rank is always 0. */
#ifndef MINIPETSC_H
#define MINIPETSC_H

#include <math.h>
#include <stdarg.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

typedef int PetscErrorCode;
typedef int PetscInt;
typedef int PetscMPIInt;
typedef double PetscReal;
typedef double PetscScalar;
typedef int MPI_Comm;

#define MPI_COMM_WORLD 0
#define PETSC_COMM_WORLD 0
#define PETSC_SUCCESS 0

typedef enum { NORM_1, NORM_2, NORM_INFINITY } NormType;

#define PetscCall(expr)                                                              \
  do {                                                                               \
    PetscErrorCode minipetsc_ierr = (expr);                                          \
    if (minipetsc_ierr) {                                                            \
      fprintf(stderr, "[minipetsc] error %d at %s:%d\n", minipetsc_ierr, __FILE__, __LINE__); \
      return minipetsc_ierr;                                                         \
    }                                                                                \
  } while (0)
#define CHKERRQ(ierr) \
  do {                \
    if (ierr) return (ierr); \
  } while (0)
#define PetscFunctionBeginUser
#define PetscFunctionReturn(x) return (x)

static long minipetsc_live = 0;

static inline PetscErrorCode PetscInitialize(int *argc, char ***argv, const char *file, const char *help)
{
  (void)argc; (void)argv; (void)file; (void)help;
  return 0;
}

static inline PetscErrorCode PetscFinalize(void)
{
  if (minipetsc_live > 0) {
    fprintf(stderr, "[minipetsc] PetscMallocDump: memory leak of %ld allocation(s)\n", minipetsc_live);
  }
  return 0;
}

static inline PetscErrorCode minipetsc_malloc(size_t bytes, void **out)
{
  *out = calloc(1, bytes ? bytes : 1);
  if (!*out) return 55;
  minipetsc_live++;
  return 0;
}

static inline PetscErrorCode minipetsc_free(void **p)
{
  if (*p) {
    free(*p);
    minipetsc_live--;
    *p = NULL;
  }
  return 0;
}

#define PetscMalloc1(n, p) minipetsc_malloc((size_t)(n) * sizeof(**(p)), (void **)(p))
#define PetscFree(p) minipetsc_free((void **)&(p))

static inline PetscErrorCode PetscPrintf(MPI_Comm comm, const char *fmt, ...)
{
  va_list ap;
  (void)comm;
  va_start(ap, fmt);
  vprintf(fmt, ap);
  va_end(ap);
  return 0;
}

static inline int MPI_Comm_rank(MPI_Comm comm, PetscMPIInt *rank) { (void)comm; *rank = 0; return 0; }
static inline int MPI_Comm_size(MPI_Comm comm, PetscMPIInt *size) { (void)comm; *size = 1; return 0; }
static inline int MPI_Barrier(MPI_Comm comm) { (void)comm; return 0; }

static inline PetscErrorCode PetscOptionsGetInt(void *opts, const char *pre, const char *name, PetscInt *value,
                                                int *set, int argc, char **argv)
{
  (void)opts; (void)pre;
  if (set) *set = 0;
  for (int i = 1; i + 1 < argc; i++) {
    if (strcmp(argv[i], name) == 0) {
      *value = atoi(argv[i + 1]);
      if (set) *set = 1;
    }
  }
  return 0;
}

struct minipetsc_vec {
  PetscInt n;
  PetscScalar *a;
};
typedef struct minipetsc_vec *Vec;

static inline PetscErrorCode VecCreateSeq(MPI_Comm comm, PetscInt n, Vec *v)
{
  (void)comm;
  PetscErrorCode ierr = PetscMalloc1(1, v);
  if (ierr) return ierr;
  (*v)->n = n;
  return PetscMalloc1(n, &(*v)->a);
}

static inline PetscErrorCode VecSetValue(Vec v, PetscInt i, PetscScalar x)
{
  if (i < 0 || i >= v->n) return 63;
  v->a[i] = x;
  return 0;
}

static inline PetscErrorCode VecNorm(Vec v, NormType type, PetscReal *out)
{
  PetscReal s = 0.0;
  for (PetscInt i = 0; i < v->n; i++) {
    if (type == NORM_1) s += fabs(v->a[i]);
    else if (type == NORM_INFINITY) s = fmax(s, fabs(v->a[i]));
    else s += v->a[i] * v->a[i];
  }
  *out = type == NORM_2 ? sqrt(s) : s;
  return 0;
}

static inline PetscErrorCode VecSum(Vec v, PetscScalar *out)
{
  PetscScalar s = 0.0;
  for (PetscInt i = 0; i < v->n; i++) s += v->a[i];
  *out = s;
  return 0;
}

static inline PetscErrorCode VecDestroy(Vec *v)
{
  if (!*v) return 0;
  PetscFree((*v)->a);
  return PetscFree(*v);
}

#endif
