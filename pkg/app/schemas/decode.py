"""
Decoding schemas.
"""
from pydantic import BaseModel, ConfigDict, Field


class DecodeConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    beam_size: int = Field(4, ge=1)
    length_reward: float = 0.0
    # Output cap: min(max_len, max_len_ratio * source length + max_len_offset)
    max_len: int = Field(256, ge=1)
    max_len_ratio: float = Field(2.0, gt=0)
    max_len_offset: int = Field(10, ge=0)

    def length_cap(self, source_length: int) -> int:
        return max(1, min(self.max_len, int(self.max_len_ratio * source_length) + self.max_len_offset))


# Grid searched when tuning the length reward on a dev set
LENGTH_REWARD_GRID = (-0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8)
