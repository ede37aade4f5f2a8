"""Loaders, lookup and export tools for information-retrieval test collections."""

__version__ = "0.1.0"

from .registry import (DatasetHandle, EntityProvider, capabilities,  # noqa: E402
                       create_dataset, list_datasets, load, register)

__all__ = ["__version__", "load", "create_dataset", "list_datasets", "capabilities",
           "register", "DatasetHandle", "EntityProvider"]
