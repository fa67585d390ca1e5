from .dataset import ClassRecord, Dataset, load_dataset, save_dataset
from .fst import read_tensor, write_tensor
from .netpbm import load_image, load_mask, save_image, save_map, save_mask
from .splits import PASCAL5I, holdout_split, pascal5i_split
from .synthetic import SHAPES, SynthConfig, generate_synthetic_dataset

__all__ = [
    "ClassRecord", "Dataset", "load_dataset", "save_dataset",
    "read_tensor", "write_tensor",
    "load_image", "load_mask", "save_image", "save_map", "save_mask",
    "PASCAL5I", "holdout_split", "pascal5i_split",
    "SHAPES", "SynthConfig", "generate_synthetic_dataset",
]
