# app/schemas/sample.py

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator


# ======================================================
# SURVIVAL SAMPLE (experiment persistence)
# ======================================================
class ObservationModel(BaseModel):
    time: float = Field(ge=0)
    status: Literal[0, 1]


class SurvivalSampleModel(BaseModel):
    horizon: float = Field(gt=0)
    observations: List[ObservationModel]
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_horizon(self):
        if not self.observations:
            raise ValueError("sample must contain at least one observation")
        latest = max(o.time for o in self.observations)
        if latest > self.horizon:
            raise ValueError(f"observation time {latest} exceeds horizon {self.horizon}")
        return self

    @classmethod
    def from_sample(cls, sample, seed: Optional[int] = None) -> "SurvivalSampleModel":
        return cls(
            horizon=sample.horizon,
            observations=[
                ObservationModel(time=float(t), status=int(d))
                for t, d in zip(sample.times, sample.statuses)
            ],
            seed=seed,
        )

    def to_sample(self):
        from app.core.data.sample import SurvivalSample
        return SurvivalSample.from_records(
            [o.time for o in self.observations],
            [o.status for o in self.observations],
            horizon=self.horizon,
        )
