#ifndef RTGL_ATOMIC_H
#define RTGL_ATOMIC_H

static inline void rtgl_atomic_add(double *target, double value)
{
#pragma omp atomic
    *target += value;
}

#endif
