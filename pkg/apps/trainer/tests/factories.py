import factory

from apps.trainer.config import CriticMode, TrainConfig


class TrainConfigFactory(factory.Factory):
    """Desk-sized configs that train in well under a second."""

    class Meta:
        model = TrainConfig

    omega = 5.0
    gamma = 0.9
    lr = 1e-3
    batch_size = 16
    gradient_steps = 20
    hidden_dims = (16, 16)
    activation = "tanh"
    tau = 0.05
    r_equals_k_fraction = 0.25
    eval_every = 10
    eval_episodes = 2
    fm_sampling_steps = 4
    lambda_temp = 1.0
    seed = factory.Sequence(lambda n: n)
    shared = True
    critic = CriticMode.JOINT
    agent_id_features = True
