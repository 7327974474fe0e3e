/** Pure view-model computation.
 *
 * The console is a projection of server state: everything displayed is a
 * function of one GET response, so a page refresh reconstructs the exact
 * same view. Marker styling encodes provenance - blue for a fresh
 * prediction, yellow once corrected, green after confirmation.
 */
import type {
  PixelPointDto,
  PracticeStateDto,
  SessionStateDto,
  TurnDto,
} from "./types.js";

export type MarkerStyle = "predicted" | "corrected" | "confirmed";

export interface MarkerView extends PixelPointDto {
  style: MarkerStyle;
}

export interface SessionView {
  sessionId: string;
  phase: string;
  image: { id: string; width: number; height: number };
  marker: MarkerView | null;
  history: TurnDto[];
  inputDisabled: boolean;
  executed: boolean;
}

function markerStyle(state: SessionStateDto): MarkerStyle {
  if (state.phase === "Executing" || state.phase === "Confirmed") {
    return "confirmed";
  }
  for (let i = state.history.length - 1; i >= 0; i--) {
    const turn = state.history[i]!;
    if (turn.target === null) continue;
    if (turn.kind === "CorrectionApplied") return "corrected";
    if (turn.kind === "PredictionSet") return "predicted";
  }
  return "predicted";
}

export function sessionView(state: SessionStateDto): SessionView {
  // overlay present iff the server reports a current target
  const marker: MarkerView | null = state.target
    ? { u: state.target.u, v: state.target.v, style: markerStyle(state) }
    : null;
  return {
    sessionId: state.id,
    phase: state.phase,
    image: state.image,
    marker,
    history: state.history,
    inputDisabled: state.phase === "Executing",
    executed: state.phase === "Executing",
  };
}

export interface PracticeView {
  trialId: string;
  image: { id: string; width: number; height: number };
  target: PixelPointDto;
  targetRadius: number;
  markerRadius: number;
  marker: PixelPointDto | null;
  distances: number[];
  remainingBudget: number;
  inputDisabled: boolean;
  complete: boolean;
  hit: boolean;
}

export function practiceView(state: PracticeStateDto): PracticeView {
  const complete = state.done || state.remaining_budget <= 0;
  const last = state.distances.length
    ? state.distances[state.distances.length - 1]!
    : null;
  return {
    trialId: state.id,
    image: state.image,
    target: state.target,
    targetRadius: state.target_radius,
    markerRadius: state.marker_radius,
    marker: state.marker,
    distances: state.distances,
    remainingBudget: state.remaining_budget,
    inputDisabled: complete,
    complete,
    // visual success: the marker center landed inside the target circle
    hit: last !== null && last <= state.target_radius,
  };
}
