// Wire formats of the annotation service, mirrored as zod schemas.
// Everything the UI sends or receives passes through these; `.strict()`
// on the rating item means a payload smuggling anything beyond the blind
// handle (say, a system id) fails loudly instead of reaching the screen.

import { z } from "zod";

export const GRADES = ["fluent", "not_fluent", "difficult"] as const;
export type Grade = (typeof GRADES)[number];

const tokens = z.array(z.string());

export const sourceSentenceSchema = z.object({
  language: z.string(),
  tokens,
});

export const assignmentSchema = z.object({
  sentence_id: z.string().min(1),
  annotator: z.string().min(1),
  language: z.string(),
  tokens: tokens.min(1),
  source: sourceSentenceSchema.nullable(),
});
export type Assignment = z.infer<typeof assignmentSchema>;

export const gradeSubmissionSchema = z.object({
  sentence_id: z.string().min(1),
  annotator: z.string().min(1),
  grade: z.enum(GRADES),
});
export type GradeSubmission = z.infer<typeof gradeSubmissionSchema>;

export const submitResultSchema = z.object({
  status: z.literal("stored"),
  duplicate: z.boolean(),
});
export type SubmitResult = z.infer<typeof submitResultSchema>;

export const evalCaptionSchema = z
  .object({
    handle: z.string().regex(/^h\d+$/, "blind handle like h1, h2, ..."),
    tokens,
  })
  .strict();

export const evalItemSchema = z.object({
  image_id: z.string().min(1),
  rater: z.string().min(1),
  items: z.array(evalCaptionSchema).min(2),
  context_tokens: tokens.nullable(),
});
export type EvalItem = z.infer<typeof evalItemSchema>;

export const LIKERT_MIN = 1;
export const LIKERT_MAX = 5;

const likert = z.number().int().min(LIKERT_MIN).max(LIKERT_MAX);

export const ratingSubmissionSchema = z.object({
  rater: z.string().min(1),
  image_id: z.string().min(1),
  ratings: z
    .array(
      z.object({
        handle: z.string().regex(/^h\d+$/),
        relevance: likert,
        fluency: likert,
      }),
    )
    .min(1),
});
export type RatingSubmission = z.infer<typeof ratingSubmissionSchema>;

export const progressSchema = z.object({
  grading: z.object({
    sentences: z.number(),
    graded_twice: z.number(),
    grades: z.number(),
    per_annotator: z.record(z.number()),
  }),
  rating: z.object({
    images: z.number(),
    rated_twice: z.number(),
    ratings: z.number(),
  }),
});
export type Progress = z.infer<typeof progressSchema>;
