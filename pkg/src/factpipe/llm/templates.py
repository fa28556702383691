"""Prompt catalogue for every agent step.

Bodies are kept as the agents were originally prompted.  Only the named
placeholders below are substituted; any other brace in a body (the JSON
examples, the ``{{`` in the verdict prompt) is left untouched.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum

from factpipe.errors import MissingBinding

PLACEHOLDERS = ("claim", "query", "content", "cell", "k")
_PLACEHOLDER = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")


class TemplateName(str, Enum):
    DECOMPOSITION = "Decomposition"
    VERIFIABILITY_CLASSIFICATION = "VerifiabilityClassification"
    QUERY_GENERATION = "QueryGeneration"
    CONTENT_RETRIEVAL = "ContentRetrieval"
    VERDICT_PREDICTION = "VerdictPrediction"
    EXPLANATION_JUDGE = "ExplanationJudge"


@dataclass(frozen=True)
class PromptTemplate:
    name: TemplateName
    body: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        seen: list[str] = []
        for m in _PLACEHOLDER.finditer(self.body):
            if m.group(1) not in seen:
                seen.append(m.group(1))
        return tuple(seen)

    def render(self, bindings: Mapping[str, str]) -> str:
        return render(self, bindings)


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every placeholder in one pass; unbound placeholders raise."""
    for name in template.placeholders:
        if name not in bindings:
            raise MissingBinding(name)
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.body)


DECOMPOSITION = PromptTemplate(TemplateName.DECOMPOSITION, """\
You are given a problem description and a claim. The task is to define all the predicates in the claim and return them in JSON format, as shown in the example below.
Below is the example Claim: Howard University Hospital and Providence Hospital are both located in Washington, D.C.
{ "response": "Predicates:
Location(Howard_University_Hospital, Washington_D.C.) ::: Verify Howard University Hospital is located in Washington, D.C.
Location(Providence_Hospital, Washington_D.C.) ::: Verify Providence Hospital is located in Washington, D.C.

Below is the Claim: In 1959, former Chilean boxer Alfredo Cornejo Cuevas (born June 6, 1933) won the gold medal in the welterweight division at the Pan American Games (held in Chicago, United States, from August 27 to September 7) in Chicago, United States, and the world amateur welterweight title in Mexico City.
{ "response": "Predicates:
Born(Alfredo_Cornejo_Cuevas, June 6 1933) ::: Verify that Alfredo Cornejo Cuevas was born June 6, 1933.
Won(Alfredo_Cornejo_Cuevas, the gold medal in the welterweight division at the Pan American Games in 1959) ::: Verify that Alfredo Cornejo Cuevas won the gold medal in the welterweight division at the Pan American Games in 1959.
Held(The Pan American Games in 1959, Chicago United States) ::: Verify that the Pan American Games in 1959 were held in Chicago, United States.
Won(Alfredo_Cornejo_Cuevas, the world amateur welterweight title in Mexico City) ::: Verify that Alfredo Cornejo Cuevas won the world amateur welterweight title in Mexico City.

Below is the Claim: {claim}""")

VERIFIABILITY_CLASSIFICATION = PromptTemplate(TemplateName.VERIFIABILITY_CLASSIFICATION, """\
You are an expert in claim verification. Your task is to determine whether a given claim is verifiable or non-verifiable.
A verifiable claim is a factual statement that can be checked against objective evidence from reliable sources. It makes specific assertions about the world that can be proven true or false through investigation.

A non-verifiable claim is one that cannot be objectively verified because it:
- Expresses a subjective opinion, preference, or personal experience
- Makes vague or ambiguous statements without specific details
- Refers to future events that haven't occurred yet
- Makes normative or ethical judgments about what "should" be
- Contains hypothetical scenarios or counterfactuals
Examples:
Verifiable: "The average global temperature increased by 0.8°C between 1880 and 2012."
Non-verifiable: "Climate change is the most important issue facing humanity today."
Verifiable: "The film 'Parasite' won the Academy Award for Best Picture in 2020."
Non-verifiable: "Parasite deserved to win the Academy Award for Best Picture."
Please analyze the following claim and classify it as either VERIFIABLE or NON-VERIFIABLE. Provide a brief explanation for your classification.
Claim: {claim}
Classification:""")

QUERY_GENERATION = PromptTemplate(TemplateName.QUERY_GENERATION, """\
For each input subclaim, generate {k} Google search question(s) that could be used to find evidence to verify the subclaim.
The questions should be diverse, exploring different aspects or perspectives related to the subclaim, while remaining clear and concise. Follow these guidelines:
1. Use Specific Keywords: Include precise terms related to entities and relationships in the claim.
2. Incorporate Synonyms and Related Terms: Use alternative phrasings to overcome vocabulary mismatches.
3. Vary Specificity: Generate both specific queries targeting exact details and broader queries that may capture contextual information.
4. Consider Different Angles: Approach the claim from multiple perspectives to ensure comprehensive evidence gathering.
5. Maintain Simplicity: Keep questions straightforward and directly relevant to the claim.

Return the output in JSON format like this:
[{
    "claim": "Location(Howard Hospital, Washington D.C.) ::: Verify Howard University Hospital is located in Washington, D.C.",
    "questions": ["Where is Howard Hospital located?"]
}]

Input subclaim(s):
{claim}""")

CONTENT_RETRIEVAL = PromptTemplate(TemplateName.CONTENT_RETRIEVAL, """\
You are a helpful assistant who extracts information from text.
Given the following query and text content, extract only the sentences or phrases that directly
relate to the query. Do not include any information that is not relevant.
If the content contains no relevant information, return None.

Query: {query}

Content:
{content}

Relevant Information:""")

VERDICT_PREDICTION = PromptTemplate(TemplateName.VERDICT_PREDICTION, """\
You are an AI assistant responsible for determining whether a subclaim is supported by retrieved evidence.

    ## Provided Information:
    This is a claim to do fact-checking:
    \\\\n {claim}
    Here is the given subclaims, its subquestions, and retrieved evidence for each subquestion:
    \\\\n {cell}

    ## Decision-Making Process:

    1. Analyze the Retrieved Evidence
    - Review all provided evidence relevant to the subclaim.
    - Assess the credibility, consistency, and reliability of each piece of evidence.

    2. Apply a Voting System for Classification
    - If multiple sources strongly support the subclaim, classify it as "supported".
    - If multiple sources contradict the subclaim, classify it as "not_supported".
    - If the evidence is mixed, insufficient, or inconclusive, classify it as "not_supported".

    3. Provide a Justification
    - Clearly explain why the subclaim is classified as "supported" or "not_supported".
    - Reference key pieces of evidence that influenced your decision.
    - If the evidence is inconclusive, explain the limitations or uncertainties.
    - Remember to adjust not to include " for later parse
    ## Response Format:
    Your response must be a structured JSON object:

    ```json
    {{
        "label": "supported" or "not_supported",
        "explanation": "A concise, evidence-based summary supporting your decision."
    }}""")

EXPLANATION_JUDGE = PromptTemplate(TemplateName.EXPLANATION_JUDGE, """\
You are an expert evaluator for automated fact-check explanations. Your task is to:

- Review the original claim, its label, and the explanations produced by 4 methods. Each method may produce a different label; consider this when evaluating Soundness.
- Evaluate each explanation according to 3 criteria:

  1. Coverage: To what extent the explanation includes all the salient and relevant information necessary to verify the claim.
  2. Soundness: The logical consistency of the explanation; whether it supports or contradicts its own label and the original claim.
  3. Readability: The clarity and coherence of the explanation; how easily a human can follow and understand it.

- Provide a **ranking (1 for best, 4 for worst)** for each criterion.
Here is the input:
{cell}
The output should be in the format
{
  "ranking": {
    "Coverage": { "1": "<method>", "2": "<method>", "3": "<method>", "4": "<method>" },
    "Soundness": { "1": "<method>", "2": "<method>", "3": "<method>", "4": "<method>" },
    "Readability": { "1": "<method>", "2": "<method>", "3": "<method>", "4": "<method>" }
  }
}""")

CATALOG: dict[TemplateName, PromptTemplate] = {
    t.name: t
    for t in (DECOMPOSITION, VERIFIABILITY_CLASSIFICATION, QUERY_GENERATION,
              CONTENT_RETRIEVAL, VERDICT_PREDICTION, EXPLANATION_JUDGE)
}


def get_template(name: TemplateName | str) -> PromptTemplate:
    return CATALOG[TemplateName(name)]
