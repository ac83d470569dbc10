from .core import (  # noqa: F401
    ModelConfig,
    ModelParams,
    attr_sequence_tokens,
    decode_state,
    encode_bag,
    forward_backward,
    init_params,
    intent_probs,
    score_products,
    total_loss,
)
from .data import (  # noqa: F401
    TrainingExample,
    build_examples,
    build_vocabs,
    candidate_pool,
    product_token_ids,
    state_sequence_tokens,
)
from .gradcheck import grad_check  # noqa: F401
from .train import AdamW, PlateauScheduler, TrainConfig, train  # noqa: F401
from .vocab import Vocab  # noqa: F401
