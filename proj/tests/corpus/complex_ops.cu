#include <pycuda-complex.hpp>

__global__ void rotate(complexf *z, float theta, unsigned int n)
{
  unsigned int i = threadIdx.x + blockIdx.x * blockDim.x;
  if (i < n) {
    complexf w = make_complexf(cosf(theta), sinf(theta));
    z[i] = conjf(z[i] * w) + crealf(z[i]) * 0.5f;
  }
}

__global__ void magnitude(const complexd *z, double *m, unsigned int n)
{
  unsigned int i = threadIdx.x + blockIdx.x * blockDim.x;
  if (i < n) m[i] = cabs(z[i]) + cimag(z[i]) * creal(z[i]);
}
