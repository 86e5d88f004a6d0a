#include <petsc.h>

int main(int argc, char **argv)
{
  PetscCall(PetscInitialize(&argc, &argv, NULL, NULL));
  PetscCall(PetscPrintf(PETSC_COMM_WORLD, "result = %d\n", 1)
  PetscCall(PetscFinalize());
  return 0;
}
