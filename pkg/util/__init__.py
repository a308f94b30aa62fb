from .torch_utils import enable_determinism, resolve_dtype, set_global_seed
