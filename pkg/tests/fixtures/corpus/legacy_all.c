#include <petsc.h>

int main(int argc, char **argv)
{
  PetscErrorCode ierr;
  Vec v;

  ierr = PetscInitialize(&argc, &argv, NULL, NULL); CHKERRQ(ierr);
  ierr = VecCreateSeq(PETSC_COMM_WORLD, 4, &v); CHKERRQ(ierr);
  ierr = VecDestroy(&v); CHKERRQ(ierr);
  ierr = PetscFinalize(); CHKERRQ(ierr);
  return 0;
}
