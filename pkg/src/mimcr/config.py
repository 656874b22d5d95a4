"""Training/evaluation hyper-parameters and their JSON form."""
import json
from dataclasses import asdict, dataclass, fields


@dataclass
class TrainConfig:
    episodes: int = 10000
    batch_size: int = 128
    lr: float = 1e-4
    gamma: float = 0.999
    max_turns: int = 15  # T
    rec_k: int = 10  # K, items per recommendation
    k_a: int = 2  # instances per question
    k_v: int = 10
    k_p: int = 10
    k_i: int = 2  # number of interests
    iterations: int = 2  # M
    l_c: int = 2
    l_g: int = 1
    d: int = 64
    hidden: int = 64
    n_v: int = 2
    buffer_capacity: int = 50000
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decay_frac: float = 0.2
    target_update_interval: int = 20  # episodes; 0 disables the target network
    strategy: str = "top"
    candidate_mode: str = "union"
    accum: str = "mean"
    seed: int = 0
    # rewards
    r_rec_suc: float = 1.0
    r_rec_fail: float = -0.1
    r_ask_suc: float = 0.01
    r_ask_fail: float = 0.1
    r_quit: float = -0.3
    # modelling switches
    freeze_embeddings: bool = False
    weighted_messages: bool = False
    log_prior: bool = False
    dueling_mean: bool = False
    prune_attrs: bool = True
    train_every: int = 1
    checkpoint_every: int = 0
    split_ratios: tuple = (0.7, 0.15, 0.15)

    def __post_init__(self):
        self.split_ratios = tuple(self.split_ratios)
        self.validate()

    def validate(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("batch_size", "max_turns", "rec_k", "k_a", "k_v", "k_p", "k_i", "iterations",
                     "l_c", "l_g", "d", "hidden", "n_v", "buffer_capacity", "train_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.strategy not in ("top", "sum"):
            raise ValueError(f"strategy must be 'top' or 'sum', got {self.strategy!r}")
        if self.candidate_mode not in ("union", "intersection"):
            raise ValueError(f"candidate_mode must be 'union' or 'intersection', got {self.candidate_mode!r}")
        if self.accum not in ("mean", "sum"):
            raise ValueError(f"accum must be 'mean' or 'sum', got {self.accum!r}")

    @property
    def use_target_net(self):
        return self.target_update_interval > 0

    def epsilon(self, episode):
        """Linear decay from eps_start to eps_end over the first eps_decay_frac of training."""
        span = self.eps_decay_frac * self.episodes
        if span <= 0:
            return self.eps_end
        frac = min(1.0, episode / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def to_dict(self):
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise KeyError(f"unknown config field {unknown[0]!r}")
        return cls(**d)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))
