from schematics import Model
from schematics.types import StringType, IntType, BooleanType

GROUPS = ['clinical-information', 'drug-information', 'disease-biology']
SCOPES = ['general', 'specific']
METRICS = ['accuracy', 'relevance', 'readability']


class QuestionDTO(Model):
    """ Describes one benchmark question """

    id = IntType(required=True, min_value=1, max_value=19)
    text = StringType(required=True, min_length=1)
    group = StringType(required=True, choices=GROUPS)
    scope = StringType(required=True, choices=SCOPES)


class ModelEntryDTO(Model):
    """ Describes one evaluated workflow """

    model_id = StringType(required=True, min_length=1)
    workflow = StringType(required=True)
    evaluation = StringType()
    base_llm = StringType(required=True)


class ScoreRecordDTO(Model):
    """ Describes one reviewer's rating of one answer on one metric """

    question_id = IntType(required=True, min_value=1, max_value=19)
    model_id = StringType(required=True, min_length=1)
    metric = StringType(required=True, choices=METRICS)
    reviewer_id = StringType(required=True, min_length=1)
    score = IntType(required=True, choices=[1, 2, 3])
    adjudicated = BooleanType(default=False)

    def key(self):
        return (self.question_id, self.model_id, self.metric)


class HallucinationDTO(Model):
    """ Describes the hallucinations a reviewer found in one answer """

    question_id = IntType(required=True, min_value=1, max_value=19)
    model_id = StringType(required=True, min_length=1)
    count = IntType(required=True, min_value=0)
    note = StringType(default='')
