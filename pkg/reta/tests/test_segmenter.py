import random

from reta.models.dtos.corpus_dto import DocumentDTO
from reta.models.utils import ConfigError, EmptyDocumentError, PreconditionError
from reta.services.segment_service import RegexTokenizer, SegmentService, get_tokenizer
from reta.tests.base import BaseTestCase

WORDS = ['DLBCL', 'glofitamab', 'response', 'rate', 'was', '52', '%', 'patients', 'CD20', 'x', 'bispecific',
         'antibody', '(', ')', ',', '.', 'R-CHOP', 'follicular', 'ctDNA', 'MRD']


def document(body, pmc_id='PMC1'):
    return DocumentDTO({'pmc_id': pmc_id, 'title': 'T', 'body': body})


def random_body(rng, n_tokens):
    parts = []
    for _ in range(n_tokens):
        parts.append(rng.choice(WORDS))
        parts.append(rng.choice([' ', ' ', '  ', '\n', '\n\n', '\t']))
    return ''.join(parts)


class TokenizerTest(BaseTestCase):
    def test_detaches_punctuation(self):
        assert RegexTokenizer().tokenize('ORR was 52%.') == ['ORR', 'was', '52', '%', '.']

    def test_round_trip_up_to_whitespace(self):
        tokenizer = RegexTokenizer()
        text = 'Glofitamab  (a CD20xCD3 bispecific)\n\nwas studied.'

        assert tokenizer.token_to_text(tokenizer.tokenize(text)) == tokenizer.normalize(text)
        assert tokenizer.normalize(tokenizer.normalize(text)) == tokenizer.normalize(text)

    def test_count_tokens(self):
        tokenizer = RegexTokenizer()

        assert SegmentService.count_tokens('DLBCL is a lymphoma', tokenizer) == 4
        assert SegmentService.count_tokens('DLBCL is a lymphoma', tokenizer) == \
            len(tokenizer.tokenize('DLBCL is a lymphoma'))

    def test_repeated_text_count(self):
        tokenizer = RegexTokenizer()
        for text in ('DLBCL is a lymphoma', 'ORR 52%', 'end.'):
            single = SegmentService.count_tokens(text, tokenizer)
            double = SegmentService.count_tokens(text + text, tokenizer)
            assert 2 * single - 1 <= double <= 2 * single

    def test_unknown_tokenizer(self):
        with self.assertRaises(ConfigError):
            get_tokenizer('sentencepiece')


class SegmentDocumentTest(BaseTestCase):
    def test_long_body_is_packed_greedily(self):
        body = ' '.join(f'w{i}' for i in range(9000))
        segments = SegmentService.segment_document(document(body), RegexTokenizer())

        assert [s.token_count for s in segments] == [4000, 4000, 1000]
        assert [s.index for s in segments] == [0, 1, 2]
        assert segments[1].text.startswith('w4000 ')

    def test_short_body_is_one_segment(self):
        segments = SegmentService.segment_document(document('A short body.'), RegexTokenizer())

        assert len(segments) == 1
        assert segments[0].text == 'A short body.'
        assert segments[0].key == ('PMC1', 0)

    def test_random_documents_reconstruct(self):
        rng = random.Random(42)
        tokenizer = RegexTokenizer()
        for _ in range(100):
            body = random_body(rng, rng.randint(1, 400))
            max_tokens = rng.randint(1, 120)
            segments = SegmentService.segment_document(document(body), tokenizer, max_tokens)

            assert all(s.token_count == max_tokens for s in segments[:-1])
            assert 1 <= segments[-1].token_count <= max_tokens
            assert [s.index for s in segments] == list(range(len(segments)))
            assert tokenizer.normalize(tokenizer.separator.join(s.text for s in segments)) == tokenizer.normalize(body)
            assert all(s.text in body for s in segments)
            assert all(SegmentService.count_tokens(s.text, tokenizer) == s.token_count for s in segments)
            assert sum(s.token_count for s in segments) == SegmentService.count_tokens(body, tokenizer)

    def test_segments_keep_the_original_prose(self):
        body = 'Glofitamab  was studied.\n\nIn relapsed DLBCL, the ORR was 52%.'
        segments = SegmentService.segment_document(document(body), RegexTokenizer(), 8)

        assert segments[0].text == 'Glofitamab  was studied.\n\nIn relapsed DLBCL,'
        assert segments[1].text == 'the ORR was 52%.'

    def test_segmenting_is_deterministic(self):
        body = random_body(random.Random(1), 300)

        assert SegmentService.segment_document(document(body), RegexTokenizer(), 50) == \
            SegmentService.segment_document(document(body), RegexTokenizer(), 50)

    def test_overlap_repeats_trailing_tokens(self):
        body = ' '.join(f'w{i}' for i in range(25))
        segments = SegmentService.segment_document(document(body), RegexTokenizer(), 10, overlap=3)

        assert segments[0].text.split()[-3:] == segments[1].text.split()[:3]
        assert all(s.token_count <= 10 for s in segments)
        assert segments[-1].text.endswith('w24')

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigError):
            SegmentService.segment_document(document('text'), RegexTokenizer(), 0)
        with self.assertRaises(ConfigError):
            SegmentService.segment_document(document('text'), RegexTokenizer(), 10, overlap=10)

    def test_whitespace_body(self):
        with self.assertRaises(EmptyDocumentError):
            SegmentService.segment_document(document(' \n\t '), RegexTokenizer())

    def test_empty_body(self):
        doc = DocumentDTO({'pmc_id': 'PMC1', 'title': 'T', 'body': ''})

        with self.assertRaises(PreconditionError):
            SegmentService.segment_document(doc, RegexTokenizer())
