/** Wire types mirroring the session service's JSON responses. */

export interface PixelPointDto {
  u: number;
  v: number;
}

export interface ImageInfoDto {
  id: string;
  width: number;
  height: number;
}

export type PhaseName =
  | "AwaitingInstruction"
  | "HasCandidate"
  | "Confirmed"
  | "Executing";

export type EventKindName =
  | "PredictionSet"
  | "CorrectionApplied"
  | "ContactTaskEmitted"
  | "RejectedNoTarget"
  | "Failure";

export interface TurnDto {
  utterance: string;
  intent: string | null;
  kind: EventKindName;
  target: PixelPointDto | null;
  message: string;
}

export interface SessionStateDto {
  id: string;
  phase: PhaseName;
  target: PixelPointDto | null;
  image: ImageInfoDto;
  initial_prediction_utterance: string | null;
  history: TurnDto[];
}

export interface SessionEventDto {
  kind: EventKindName;
  intent: string | null;
  target: PixelPointDto | null;
  phase: PhaseName;
  message: string;
  clamped: boolean;
  task?: unknown;
  ack?: string;
}

export interface PracticeStateDto {
  id: string;
  target: PixelPointDto;
  target_radius: number;
  marker_radius: number;
  prompt_budget: number;
  remaining_budget: number;
  distances: number[];
  marker: PixelPointDto | null;
  done: boolean;
  image: ImageInfoDto;
}

export interface PracticeUtteranceReplyDto extends PracticeStateDto {
  distance_px?: number;
  stopped?: boolean;
  rejected?: string;
}
