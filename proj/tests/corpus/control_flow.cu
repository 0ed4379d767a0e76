__global__ void collatz(const int *start, int *steps, int n)
{
  int i = blockIdx.x * blockDim.x + threadIdx.x;
  if (i < n) {
    long long x = start[i];
    int count = 0;
    while (x != 1 && count < 1000) {
      if (x % 2 == 0) x = x / 2;
      else x = 3 * x + 1;
      ++count;
    }
    do {
      count--;
    } while (count > 5000);
    steps[i] = count + 1;
  }
}

__global__ void bits(unsigned int *v, int n)
{
  for (int i = 0; i < n; i++) {
    unsigned int x = v[i];
    x = (x << 3) | (x >> 29);
    x ^= ~x & 0xff00u;
    v[i] = !x ? 1u : x % 7u;
    if (i == 3) continue;
    if (i > 100) break;
  }
}
