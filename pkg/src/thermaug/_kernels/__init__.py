"""Hot numeric kernels, each available as ``*_numba`` and ``*_numpy``.

The unsuffixed name in every module is bound to the backend chosen in
:mod:`thermaug._accel`.
"""
