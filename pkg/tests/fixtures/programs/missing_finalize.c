#include <petsc.h>

int main(int argc, char **argv)
{
  PetscInt n = 10;
  PetscReal s = 0.0;

  PetscCall(PetscInitialize(&argc, &argv, NULL, NULL));
  PetscCall(PetscOptionsGetInt(NULL, NULL, "-n", &n, NULL, argc, argv));
  for (PetscInt i = 1; i <= n; i++) s += (PetscReal)i * i;
  PetscCall(PetscPrintf(PETSC_COMM_WORLD, "result = %.17g\n", sqrt(s)));
  return 0;
}
