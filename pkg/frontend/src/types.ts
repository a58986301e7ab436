// Wire shapes of the labeling service API.

export type Reaction = "up" | "down";
export type CardStatus = "pending" | "resolved" | "dropped_tie" | "expired";

export interface CardLink {
  title: string;
  url: string;
}

export interface Tallies {
  up: number;
  down: number;
}

export interface CardView {
  point_id: string;
  created_at: number;
  summary_text: string;
  links: CardLink[];
  cluster: number;
  status: CardStatus;
  resolved_at: number | null;
  final_verdict: "normal" | "abnormal" | null;
  vote_counts: Record<string, number>;
  tallies: Tallies;
  own_reaction: Reaction | null;
}

export interface CandidatePage {
  total: number;
  offset: number;
  cards: CardView[];
}

export interface LabelRecord {
  point_id: string;
  annotator_id: string;
  verdict: "normal" | "abnormal";
  timestamp: number;
}

export interface AnnotatorStats {
  annotator_id: string;
  total_reactions: number;
  abnormal_rate: number;
  z_score: number;
  flagged: "none" | "over_reporter" | "under_reporter";
}
