/* Fill a vector with 1..n and print one reduction of it. */
#include <petsc.h>

static const char *op_name(int argc, char **argv)
{
  for (int i = 1; i + 1 < argc; i++) {
    if (strcmp(argv[i], "-op") == 0) return argv[i + 1];
  }
  return "norm2";
}

static PetscErrorCode reduce(Vec v, const char *op, PetscReal *out)
{
  PetscFunctionBeginUser;
  if (strcmp(op, "sum") == 0) {
    PetscCall(VecSum(v, out));
  } else if (strcmp(op, "norm1") == 0) {
    PetscCall(VecNorm(v, NORM_1, out));
  } else if (strcmp(op, "norminf") == 0) {
    PetscCall(VecNorm(v, NORM_INFINITY, out));
  } else {
    PetscCall(VecNorm(v, NORM_2, out));
  }
  PetscFunctionReturn(PETSC_SUCCESS);
}

int main(int argc, char **argv)
{
  Vec v;
  PetscInt n = 10;
  PetscReal result;

  PetscCall(PetscInitialize(&argc, &argv, NULL, NULL));
  PetscCall(PetscOptionsGetInt(NULL, NULL, "-n", &n, NULL, argc, argv));
  PetscCall(VecCreateSeq(PETSC_COMM_WORLD, n, &v));
  for (PetscInt i = 0; i < n; i++) PetscCall(VecSetValue(v, i, (PetscScalar)(i + 1)));
  PetscCall(reduce(v, op_name(argc, argv), &result));
  PetscCall(PetscPrintf(PETSC_COMM_WORLD, "result = %.17g\n", result));
  PetscCall(VecDestroy(&v));
  PetscCall(PetscFinalize());
  return 0;
}
