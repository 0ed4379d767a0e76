__global__ void histogram(const float *x, int *bins, unsigned int n, int nbins)
{
  unsigned int i = blockIdx.x * blockDim.x + threadIdx.x;
  if (i < n) {
    int b = (int)(x[i] * (float)nbins);
    b = min(max(b, 0), nbins - 1);
    atomicAdd(&bins[b], 1);
  }
}

__global__ void math(double *y, const double *x, unsigned int n)
{
  unsigned int i = blockIdx.x * blockDim.x + threadIdx.x;
  if (i < n) {
    double v = fabs(x[i]) + 1.0;
    y[i] = sqrt(v) + exp(-v) + log(v) + pow(v, 0.5) + floor(v) - ceil(v) + fmin(v, 2.0) * fmax(v, 1.0);
    y[i] += sin(v) * cos(v) + (double)(long long)v;
  }
}
