"""finetune_bridge: pretrained-transformer fine-tuning over tdockit dataset exports.

This package reads only the exported dataset files (JSON Lines splits plus the
dataset.json sidecar) and writes predictions in the schema the main toolkit's
`evaluate --predictions` scores. It never touches raw corpora, so all
preprocessing stays on the toolkit side of the contract.
"""

__version__ = "0.1.0"
