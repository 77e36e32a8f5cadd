from schematics import Model
from schematics.types import StringType, IntType, FloatType, BooleanType, ListType, ModelType, DictType, \
    DateTimeType


class RetrievedDTO(Model):
    pmc_id = StringType(required=True)
    segment_index = IntType(required=True, min_value=0)
    score = FloatType(required=True, min_value=-1.0, max_value=1.0)


class StageOneDTO(Model):
    pmc_id = StringType(required=True)
    segment_index = IntType(required=True, min_value=0)
    text = StringType(default='')
    is_refusal = BooleanType(required=True)


class AuditRecordDTO(Model):
    """ Describes one answered query, appended to the audit log """

    query = StringType(required=True, min_length=1)
    config_digest = StringType()
    embedding_provider = StringType()
    llm_provider = StringType()
    prompt_version = StringType()
    k = IntType(min_value=1)
    retrieved = ListType(ModelType(RetrievedDTO), default=[])
    stage_one = ListType(ModelType(StageOneDTO), default=[])
    answer = StringType(required=True)
    provenance = ListType(StringType, default=[])
    folds = IntType(default=0)
    timings = DictType(FloatType, default={})
    answered = DateTimeType()
