__device__ float square(float x) { return x * x; }

__device__ int clamp_index(int i, int lo, int hi)
{
  if (i < lo) return lo;
  else if (i > hi) return hi;
  return i;
}

__global__ void stencil(const float *in, float *out, int n)
{
  int i = blockIdx.x * blockDim.x + threadIdx.x;
  if (i >= n) return;
  float left = in[clamp_index(i - 1, 0, n - 1)];
  float right = in[clamp_index(i + 1, 0, n - 1)];
  out[i] = 0.25f * (left + right) + 0.5f * square(in[i]);
}
