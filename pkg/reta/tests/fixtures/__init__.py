import json
import os

from reta.utils import slugify

SENTINEL = 'SENTINEL-EXCLUDED'


def jats(pmc_id: str, title: str, abstract: str, paragraphs: list, extras: bool = True) -> bytes:
    """
    Minimal PMC article. With extras, every block the preprocessor must drop
    carries SENTINEL in its text.
    """

    body = ''.join(f'<p>{p}</p>' for p in paragraphs)
    noise = ''
    back = ''
    if extras:
        noise = (
            f'<fig id="f1"><caption><p>{SENTINEL} figure</p></caption></fig>'
            f'<table-wrap id="t1"><table><tr><td>{SENTINEL} table</td></tr></table></table-wrap>'
        )
        back = (
            f'<sec sec-type="COI-statement"><title>Conflict of interest</title><p>{SENTINEL} coi</p></sec>'
            f'<sec><title>Author contributions</title><p>{SENTINEL} contributions</p></sec>'
            f'<sec><title>Funding</title><p>{SENTINEL} funding</p></sec>'
        )

    return (
        '<?xml version="1.0" encoding="UTF-8"?>'
        '<pmc-articleset><article article-type="research-article">'
        '<front><article-meta>'
        f'<article-id pub-id-type="pmc">{pmc_id}</article-id>'
        f'<title-group><article-title>{title}</article-title></title-group>'
        f'<abstract><p>{abstract}</p></abstract>'
        '</article-meta></front>'
        f'<body><sec><title>Results</title>{body}{noise}</sec>{back}</body>'
        '<back>'
        + (f'<ack><p>{SENTINEL} ack</p></ack><ref-list><ref><mixed-citation>{SENTINEL} ref</mixed-citation></ref>'
           '</ref-list>' if extras else '')
        + '</back></article></pmc-articleset>'
    ).encode('utf-8')


def write_entrez_tree(root: str, searches: dict, articles: dict):
    """
    searches - {query text: [pmc ids]}
    articles - {pmc id: JATS bytes}
    """

    os.makedirs(os.path.join(root, 'esearch'), exist_ok=True)
    os.makedirs(os.path.join(root, 'efetch'), exist_ok=True)

    for query, ids in searches.items():
        payload = {'esearchresult': {'count': str(len(ids)), 'idlist': [i.replace('PMC', '') for i in ids]}}
        with open(os.path.join(root, 'esearch', slugify(query) + '.json'), 'w') as f:
            json.dump(payload, f)

    for pmc_id, xml in articles.items():
        with open(os.path.join(root, 'efetch', pmc_id + '.xml'), 'wb') as f:
            f.write(xml)

    return root


PLANTED_FACT = 'the ORR was 52%'
PLANTED_QUESTION = 'What is the overall response rate of DLBCL patients treated with glofitamab?'

PLANTED_ARTICLES = {
    'PMC100': ('Glofitamab in relapsed DLBCL', 'Glofitamab is a bispecific antibody.', [
        'Glofitamab was studied in heavily pretreated lymphoma.',
        'In patients with relapsed DLBCL treated with glofitamab, the ORR was 52% at the primary analysis.',
    ]),
    'PMC200': ('Follicular lymphoma transformation', 'Follicular lymphoma is indolent.', [
        'Transformation to an aggressive histology occurs in some cases.',
    ]),
    'PMC300': ('Circulating tumour DNA', 'ctDNA reflects tumour burden.', [
        'A two log drop in ctDNA after one cycle predicted favourable outcomes.',
    ]),
    'PMC400': ('Checkpoint blockade', 'PD-1 blockade has limited single agent activity.', [
        'Pembrolizumab produced durable responses in mediastinal lymphoma.',
    ]),
}


def planted_documents():
    """ (pmc_id, title, body) for the planted-fact corpus, body as the preprocessor would emit it """

    return [
        (pmc_id, title, '\n\n'.join([abstract] + paragraphs))
        for pmc_id, (title, abstract, paragraphs) in PLANTED_ARTICLES.items()
    ]
