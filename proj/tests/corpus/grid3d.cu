__global__ void coords(int *out)
{
  int bx = blockIdx.x, by = blockIdx.y, bz = blockIdx.z;
  int linear_block = bx + gridDim.x * (by + gridDim.y * bz);
  int tid = threadIdx.x + blockDim.x * (threadIdx.y + blockDim.y * threadIdx.z);
  int threads = blockDim.x * blockDim.y * blockDim.z;
  int *slot = out + linear_block * threads + tid;
  *slot = linear_block * 1000 + tid;
}
