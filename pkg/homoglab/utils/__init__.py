from .seed_everything import seed_everything
from .fitting import fit_order
from .linalg import SparseSolver
from .io import to_jsonable, write_columns, write_json, write_table
